/**
 * Console state machine. One store drives the whole page:
 *
 *   IDLE -> UPLOADING -> GENERATING -> REPORT_READY
 *     \________ ERROR (banner, operable for retry) ________/
 *
 * Chat and PDF download are reachable only in REPORT_READY. The store is a
 * pure client of the REST API; it computes nothing itself.
 */

import { ApiClient, ApiError, ReportPayload, SubReportPayload } from "./api.js";

export type Phase = "IDLE" | "UPLOADING" | "GENERATING" | "REPORT_READY" | "ERROR";

export interface ChatExchange {
  question: string;
  answer: string;
}

export interface ConsoleState {
  phase: Phase;
  caseId: string | null;
  sessionId: string | null;
  grade: string | null;
  cdrDisplay: string | null;
  roles: string[];
  subReports: SubReportPayload[];
  reportMarkdown: string | null;
  overlayUrl: string | null;
  chatLog: ChatExchange[];
  errorBanner: string | null;
  chatPending: boolean;
}

const INITIAL: ConsoleState = {
  phase: "IDLE",
  caseId: null,
  sessionId: null,
  grade: null,
  cdrDisplay: null,
  roles: [],
  subReports: [],
  reportMarkdown: null,
  overlayUrl: null,
  chatLog: [],
  errorBanner: null,
  chatPending: false,
};

type Listener = (state: ConsoleState) => void;

export class ConsoleStore {
  private state: ConsoleState = { ...INITIAL };
  private listeners: Listener[] = [];
  private chatQueue: Promise<unknown> = Promise.resolve();

  constructor(private readonly api: ApiClient) {}

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  get canChat(): boolean {
    return this.state.phase === "REPORT_READY";
  }

  get canDownload(): boolean {
    return this.state.phase === "REPORT_READY";
  }

  /** Upload the selected image and run report generation. */
  async uploadAndGenerate(image: Blob, filename: string, note: string): Promise<void> {
    if (this.state.phase === "UPLOADING" || this.state.phase === "GENERATING") {
      return; // control is disabled while in flight; ignore stray calls
    }
    this.set({ ...INITIAL, phase: "UPLOADING" });
    let caseId: string;
    try {
      caseId = await this.api.uploadCase(image, filename, note);
    } catch (err) {
      this.fail(describe(err, "Upload failed"));
      return;
    }
    this.set({ phase: "GENERATING", caseId });
    let report: ReportPayload;
    try {
      report = await this.api.generateReport(caseId);
    } catch (err) {
      this.fail(describe(err, "Report generation failed"));
      return;
    }
    this.set({
      phase: "REPORT_READY",
      sessionId: report.session_id,
      grade: report.grade,
      cdrDisplay: report.cdr_display,
      roles: report.roles,
      subReports: report.sub_reports,
      reportMarkdown: report.final_report_markdown,
      overlayUrl: this.api.overlayUrl(caseId),
      errorBanner: null,
    });
  }

  /**
   * Ask a follow-up question. Rapid submits queue behind the in-flight
   * request. Resolves true when the exchange was appended; false means the
   * banner explains the failure and the caller should keep the input text.
   */
  ask(question: string): Promise<boolean> {
    const run = this.chatQueue.then(() => this.askNow(question));
    // keep the chain alive whatever the outcome
    this.chatQueue = run.catch(() => undefined);
    return run;
  }

  private async askNow(question: string): Promise<boolean> {
    if (!this.canChat || this.state.sessionId === null) {
      this.set({ errorBanner: "Generate a report before asking questions." });
      return false;
    }
    this.set({ chatPending: true });
    try {
      const answer = await this.api.chat(this.state.sessionId, question);
      this.set({
        chatLog: [...this.state.chatLog, { question, answer }],
        errorBanner: null,
        chatPending: false,
      });
      return true;
    } catch (err) {
      const banner =
        err instanceof ApiError && err.status === 404
          ? "This chat session is gone (server restarted?). Regenerate the report to start a new one."
          : describe(err, "Question failed");
      this.set({ errorBanner: banner, chatPending: false });
      return false;
    }
  }

  /** Fetch the PDF record; the caller saves the returned blob. */
  async fetchPdf(): Promise<{ blob: Blob; filename: string } | null> {
    if (!this.canDownload || this.state.caseId === null) {
      this.set({ errorBanner: "The report is not ready to download." });
      return null;
    }
    try {
      const blob = await this.api.downloadPdf(this.state.caseId);
      return { blob, filename: `medchat-report-${this.state.caseId}.pdf` };
    } catch (err) {
      this.set({ errorBanner: describe(err, "Download failed") });
      return null;
    }
  }

  dismissBanner(): void {
    this.set({ errorBanner: null });
  }

  private fail(banner: string): void {
    this.set({ phase: "ERROR", errorBanner: banner });
  }
}

function describe(err: unknown, prefix: string): string {
  if (err instanceof ApiError) {
    const stage = err.stage ? ` (stage: ${err.stage})` : "";
    return `${prefix}: ${err.message}${stage}`;
  }
  return `${prefix}: ${err instanceof Error ? err.message : String(err)}`;
}
