// Dashboard controller: poll the API, render snapshots, submit actions.
// Rendered state changes only on a fresh snapshot after a 2xx; rejected
// actions surface their error code inline and trigger a re-poll, which
// re-renders the unchanged server state.

import type { Api, LedgerEventView, ProposalView, TimeView } from './api';
import {
  accountOptions,
  errorBanner,
  inlineError,
  proposalTable,
  reportsPanel,
  stateBadge,
  timeline,
} from './render';

interface Snapshot {
  proposals: ProposalView[];
  events: LedgerEventView[];
  time: TimeView;
  reports: Record<string, unknown[]>;
}

export class Dashboard {
  private accounts: Record<string, string> = {};
  private snapshot: Snapshot | null = null;
  private selectedAccount: string | null = null;
  private selectedProposal: string | null = null;
  private actionError: string | null = null;
  private connectionError: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    private api: Api,
    private pollIntervalMs = 2000,
  ) {
    this.root.addEventListener('click', (event) => this.onClick(event));
    this.root.addEventListener('change', (event) => this.onChange(event));
  }

  async start(): Promise<void> {
    this.accounts = await this.api.getAccounts();
    if (this.selectedAccount === null) {
      this.selectedAccount = Object.values(this.accounts)[0] ?? null;
    }
    await this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async refresh(): Promise<void> {
    try {
      const [proposals, events, time] = await Promise.all([
        this.api.listProposals(),
        this.api.getEvents(),
        this.api.getTime(),
      ]);
      const reports: Record<string, unknown[]> = {};
      if (this.selectedProposal !== null) {
        reports[this.selectedProposal] = await this.api.getReports(this.selectedProposal);
      }
      this.snapshot = { proposals, events, time, reports };
      this.connectionError = null;
    } catch {
      // keep the stale snapshot, flag it
      this.connectionError = 'API unreachable; showing stale data.';
    }
    this.render();
  }

  selectProposal(proposalId: string | null): void {
    this.selectedProposal = proposalId;
    this.actionError = null;
  }

  selectAccount(address: string): void {
    this.selectedAccount = address;
  }

  async vote(support: string): Promise<void> {
    await this.act(() =>
      this.api.vote(this.selectedProposal ?? '', this.selectedAccount ?? '', support),
    );
  }

  async queue(): Promise<void> {
    await this.act(() =>
      this.api.queue(this.selectedProposal ?? '', this.selectedAccount ?? ''),
    );
  }

  async execute(): Promise<void> {
    await this.act(() =>
      this.api.execute(this.selectedProposal ?? '', this.selectedAccount ?? ''),
    );
  }

  async advance(blocks: number): Promise<void> {
    await this.act(() => this.api.advance(blocks));
  }

  private async act(
    call: () => Promise<{ ok: boolean; error: string | null }>,
  ): Promise<void> {
    try {
      const result = await call();
      this.actionError = result.ok ? null : result.error;
    } catch {
      this.actionError = 'request failed';
    }
    await this.refresh();
  }

  private onClick(event: Event): void {
    const target = event.target as HTMLElement | null;
    if (!target) return;
    const row = target.closest<HTMLElement>('.proposal-row');
    if (row?.dataset.proposalId) {
      this.selectProposal(row.dataset.proposalId);
      void this.refresh();
      return;
    }
    const action = target.closest<HTMLElement>('[data-action]')?.dataset.action;
    if (action === 'vote-for') void this.vote('For');
    else if (action === 'vote-against') void this.vote('Against');
    else if (action === 'queue') void this.queue();
    else if (action === 'execute') void this.execute();
    else if (action === 'advance-hour') void this.advance(360);
  }

  private onChange(event: Event): void {
    const target = event.target as HTMLSelectElement | null;
    if (target?.dataset.role === 'account-select') {
      this.selectAccount(target.value);
    }
  }

  render(): void {
    const snapshot = this.snapshot;
    if (!snapshot) {
      this.root.innerHTML = errorBanner(this.connectionError) || '<p>Loading…</p>';
      return;
    }
    const detail = this.renderDetail(snapshot);
    this.root.innerHTML = `
      ${errorBanner(this.connectionError)}
      <header class="toolbar">
        <label>Acting as
          <select data-role="account-select">${accountOptions(this.accounts, this.selectedAccount)}</select>
        </label>
        <span data-role="clock">block ${snapshot.time.height}, t=${snapshot.time.timestamp}s</span>
        <button data-action="advance-hour">advance 1 h</button>
      </header>
      <section data-role="proposal-list">${proposalTable(snapshot.proposals, snapshot.time)}</section>
      ${detail}`;
  }

  private renderDetail(snapshot: Snapshot): string {
    if (this.selectedProposal === null) return '';
    const proposal = snapshot.proposals.find(
      (p) => p.proposal_id === this.selectedProposal,
    );
    if (!proposal) return '';
    const reports = (snapshot.reports[this.selectedProposal] ?? []) as never[];
    return `
      <section class="detail" data-role="proposal-detail">
        <h3><code>${proposal.proposal_id}</code> ${stateBadge(proposal.state)}</h3>
        <p data-role="detail-tally">${proposal.for_votes} for / ${proposal.against_votes} against</p>
        <p>package <code>${proposal.package_cid ?? '—'}</code></p>
        <div class="actions">
          <button data-action="vote-for">Vote For</button>
          <button data-action="vote-against">Vote Against</button>
          <button data-action="queue">Queue</button>
          <button data-action="execute">Execute</button>
          ${inlineError(this.actionError)}
        </div>
        <h4>Timeline</h4>
        ${timeline(snapshot.events, this.selectedProposal)}
        <h4>Verification reports</h4>
        ${reportsPanel(reports)}
      </section>`;
  }
}
