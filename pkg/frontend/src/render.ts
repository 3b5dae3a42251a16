// Pure HTML builders. No fetching, no outcome computation: everything
// shown is taken verbatim from API snapshots passed in.

import type {
  LedgerEventView,
  ProposalView,
  TimeView,
  VerificationReportView,
} from './api';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

const STATE_CLASSES: Record<string, string> = {
  Pending: 'badge-pending',
  Active: 'badge-active',
  Succeeded: 'badge-succeeded',
  Defeated: 'badge-defeated',
  Queued: 'badge-queued',
  Executed: 'badge-executed',
};

export function stateBadge(state: string): string {
  const cls = STATE_CLASSES[state] ?? 'badge-unknown';
  return `<span class="badge ${cls}" data-state="${escapeHtml(state)}">${escapeHtml(state)}</span>`;
}

export function shortHex(value: string | null, keep = 10): string {
  if (!value) return '—';
  return value.length > keep + 2 ? `${value.slice(0, keep + 2)}…` : value;
}

export function formatCountdown(proposal: ProposalView, time: TimeView): string {
  if (proposal.state === 'Pending') {
    const blocks = proposal.snapshot_block - time.height;
    return `voting opens in ${blocks * time.seconds_per_block} s`;
  }
  if (proposal.state === 'Active') {
    const blocks = proposal.deadline_block - time.height;
    return `voting closes in ${blocks * time.seconds_per_block} s`;
  }
  if (proposal.state === 'Queued' && proposal.eta !== null) {
    const remaining = proposal.eta - time.timestamp;
    return remaining > 0 ? `executable in ${remaining} s` : 'timelock elapsed';
  }
  return '';
}

export function proposalRow(proposal: ProposalView, time: TimeView): string {
  const countdown = formatCountdown(proposal, time);
  return `
    <tr class="proposal-row" data-proposal-id="${escapeHtml(proposal.proposal_id)}">
      <td class="cell-id"><code>${shortHex(proposal.proposal_id)}</code></td>
      <td>${escapeHtml(proposal.kind)}</td>
      <td>${stateBadge(proposal.state)}</td>
      <td class="cell-tally">${proposal.for_votes} for / ${proposal.against_votes} against</td>
      <td class="cell-countdown">${escapeHtml(countdown)}</td>
      <td><code>${shortHex(proposal.expected_address)}</code></td>
    </tr>`;
}

export function proposalTable(proposals: ProposalView[], time: TimeView): string {
  if (proposals.length === 0) {
    return '<p class="empty">No proposals yet.</p>';
  }
  const rows = proposals.map((p) => proposalRow(p, time)).join('');
  return `
    <table class="proposals">
      <thead><tr>
        <th>id</th><th>kind</th><th>state</th><th>tally</th><th>countdown</th><th>target</th>
      </tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

// Events belonging to one proposal's lifecycle: events that carry the
// proposal id, plus events emitted by the same transactions (package
// creation carries no proposal id of its own).
export function timelineEvents(
  events: LedgerEventView[],
  proposalId: string,
): LedgerEventView[] {
  const txKeys = new Set(
    events
      .filter((e) => e.payload['proposal_id'] === proposalId)
      .map((e) => `${e.block}:${e.tx_id}`),
  );
  return events.filter((e) => txKeys.has(`${e.block}:${e.tx_id}`));
}

export function timeline(events: LedgerEventView[], proposalId: string): string {
  const own = timelineEvents(events, proposalId);
  if (own.length === 0) {
    return '<p class="empty">No events yet.</p>';
  }
  const items = own
    .map(
      (e) =>
        `<li class="timeline-event" data-event-name="${escapeHtml(e.name)}">` +
        `<time>${escapeHtml(e.timestamp_iso)}</time> ${escapeHtml(e.name)}</li>`,
    )
    .join('');
  return `<ol class="timeline">${items}</ol>`;
}

function resultBadges(results: Record<string, boolean>, kind: string): string {
  return Object.entries(results)
    .map(
      ([name, passed]) =>
        `<span class="test ${passed ? 'test-pass' : 'test-fail'}" data-test-kind="${kind}">` +
        `${escapeHtml(name)}: ${passed ? 'pass' : 'fail'}</span>`,
    )
    .join(' ');
}

export function reportsPanel(reports: VerificationReportView[]): string {
  if (reports.length === 0) {
    return '<p class="empty" data-role="reports-empty">Awaiting verification.</p>';
  }
  const cards = reports
    .map((report) => {
      const tamper = report.integrity
        ? ''
        : '<p class="tamper-warning">Integrity check failed: package does not rebuild to the voted address.</p>';
      return `
        <div class="report" data-decision="${escapeHtml(report.decision)}">
          <h4><code>${shortHex(report.account)}</code> voted ${escapeHtml(report.decision)}</h4>
          ${tamper}
          <div>${resultBadges(report.standard_results, 'standard')}</div>
          <div>${resultBadges(report.private_results, 'private')}</div>
        </div>`;
    })
    .join('');
  return `<div class="reports">${cards}</div>`;
}

export function errorBanner(message: string | null): string {
  if (!message) return '';
  return `<div class="banner banner-error" data-role="connection-error">${escapeHtml(message)}</div>`;
}

export function inlineError(code: string | null): string {
  if (!code) return '';
  return `<span class="inline-error" data-role="action-error">${escapeHtml(code)}</span>`;
}

export function accountOptions(
  accounts: Record<string, string>,
  selected: string | null,
): string {
  return Object.entries(accounts)
    .map(
      ([name, address]) =>
        `<option value="${escapeHtml(address)}"${address === selected ? ' selected' : ''}>` +
        `${escapeHtml(name)}</option>`,
    )
    .join('');
}
