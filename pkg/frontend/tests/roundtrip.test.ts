// End-to-end round trip against the real engine: spawn the Python REST
// harness, drive the dashboard through DOM events, and observe the
// ledger's own event log. Skipped when the engine is not installed.

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { HttpApi } from '../src/api';
import { Dashboard } from '../src/app';

const PORT = 8765;
const BASE = `http://127.0.0.1:${PORT}`;

function engineAvailable(): boolean {
  const probe = spawnSync('python3', ['-c', 'import govdeploy'], { timeout: 10000 });
  return probe.status === 0;
}

async function waitFor(check: () => Promise<boolean> | boolean, ms: number): Promise<boolean> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    try {
      if (await check()) return true;
    } catch {
      // not ready yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  return false;
}

describe.skipIf(!engineAvailable())('dashboard against the live engine', () => {
  let server: ChildProcess;
  let dashboard: Dashboard;
  let root: HTMLElement;
  const api = new HttpApi(BASE);

  beforeAll(async () => {
    const reports = mkdtempSync(join(tmpdir(), 'govdeploy-reports-'));
    server = spawn(
      'python3',
      ['-m', 'govdeploy.cli', 'serve', '--port', String(PORT), '--reports-dir', reports],
      { stdio: 'ignore' },
    );
    const up = await waitFor(async () => {
      const response = await fetch(`${BASE}/time`);
      return response.ok;
    }, 30000);
    expect(up).toBe(true);

    root = document.createElement('div');
    document.body.replaceChildren(root);
    dashboard = new Dashboard(root, api, 500);
    await dashboard.start();
  });

  afterAll(() => {
    dashboard?.stop();
    server?.kill();
  });

  it('casting a vote surfaces VoteCast in the event log within one poll', async () => {
    const row = root.querySelector<HTMLElement>('.proposal-row');
    expect(row).not.toBeNull();
    row!.click();
    const detailUp = await waitFor(
      () => root.querySelector('[data-role="proposal-detail"]') !== null,
      5000,
    );
    expect(detailUp).toBe(true);

    // act as a stakeholder
    const select = root.querySelector<HTMLSelectElement>('[data-role="account-select"]');
    const accounts = await api.getAccounts();
    select!.value = accounts['stakeholder_0'];
    select!.dispatchEvent(new Event('change', { bubbles: true }));

    root.querySelector<HTMLElement>('[data-action="vote-for"]')!.click();
    const voteVisible = await waitFor(async () => {
      const events = await api.getEvents();
      return events.some((e) => e.name === 'VoteCast');
    }, 700);
    expect(voteVisible).toBe(true);

    const rendered = await waitFor(
      () =>
        root.querySelector('.timeline-event[data-event-name="VoteCast"]') !== null &&
        root.querySelector('[data-role="detail-tally"]')?.textContent ===
          '1 for / 0 against',
      5000,
    );
    expect(rendered).toBe(true);
  });

  it('a double vote renders AlreadyVoted and leaves the tally unchanged', async () => {
    root.querySelector<HTMLElement>('[data-action="vote-for"]')!.click();
    const errorShown = await waitFor(
      () =>
        root.querySelector('[data-role="action-error"]')?.textContent === 'AlreadyVoted',
      5000,
    );
    expect(errorShown).toBe(true);
    expect(root.querySelector('[data-role="detail-tally"]')?.textContent).toBe(
      '1 for / 0 against',
    );
    const proposals = await api.listProposals();
    expect(proposals[0].for_votes).toBe(1);
  });
});
