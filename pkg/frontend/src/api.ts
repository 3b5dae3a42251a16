// Typed client for the governance engine's REST API. The dashboard is a
// thin client: every piece of rendered state originates from these calls.

export interface ProposalView {
  proposal_id: string;
  kind: string;
  state: string;
  proposer: string;
  version_id: number | null;
  expected_address: string | null;
  package_cid: string | null;
  for_votes: number;
  against_votes: number;
  voters: string[];
  snapshot_block: number;
  deadline_block: number;
  eta: number | null;
}

export interface LedgerEventView {
  name: string;
  tx_id: number;
  block: number;
  timestamp: number;
  timestamp_iso: string;
  payload: Record<string, unknown>;
}

export interface VerificationReportView {
  account: string;
  proposal_id: string;
  integrity: boolean;
  standard_results: Record<string, boolean>;
  private_results: Record<string, boolean>;
  decision: string;
  produced_at: number;
}

export interface TimeView {
  height: number;
  timestamp: number;
  seconds_per_block: number;
}

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body: T | null;
  // revert/error code from a non-2xx response, verbatim
  error: string | null;
}

export interface Api {
  listProposals(): Promise<ProposalView[]>;
  getReports(proposalId: string): Promise<VerificationReportView[]>;
  getEvents(): Promise<LedgerEventView[]>;
  getAccounts(): Promise<Record<string, string>>;
  getTime(): Promise<TimeView>;
  vote(proposalId: string, voter: string, support: string): Promise<ApiResult<unknown>>;
  queue(proposalId: string, sender: string): Promise<ApiResult<unknown>>;
  execute(proposalId: string, sender: string): Promise<ApiResult<unknown>>;
  advance(blocks: number): Promise<ApiResult<TimeView>>;
}

export class HttpApi implements Api {
  constructor(private baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) {
      throw new Error(`GET ${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<ApiResult<T>> {
    const response = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    const parsed = (await response.json()) as Record<string, unknown>;
    if (response.ok) {
      return { ok: true, status: response.status, body: parsed as T, error: null };
    }
    return {
      ok: false,
      status: response.status,
      body: null,
      error: typeof parsed.error === 'string' ? parsed.error : `HTTP ${response.status}`,
    };
  }

  listProposals() {
    return this.get<ProposalView[]>('/proposals');
  }

  getReports(proposalId: string) {
    return this.get<VerificationReportView[]>(`/proposals/${proposalId}/reports`);
  }

  getEvents() {
    return this.get<LedgerEventView[]>('/events');
  }

  getAccounts() {
    return this.get<Record<string, string>>('/accounts');
  }

  getTime() {
    return this.get<TimeView>('/time');
  }

  vote(proposalId: string, voter: string, support: string) {
    return this.post(`/proposals/${proposalId}/vote`, { voter, support });
  }

  queue(proposalId: string, sender: string) {
    return this.post(`/proposals/${proposalId}/queue`, { sender });
  }

  execute(proposalId: string, sender: string) {
    return this.post(`/proposals/${proposalId}/execute`, { sender });
  }

  advance(blocks: number) {
    return this.post<TimeView>('/time/advance', { blocks });
  }
}
