/**
 * Typed client for the report service REST API. The console performs no
 * grade/CDR/prompt computation of its own; everything comes from here.
 */

export interface SubReportPayload {
  role: string;
  text: string;
}

export interface ReportPayload {
  grade: string;
  cdr_display: string;
  roles: string[];
  sub_reports: SubReportPayload[];
  final_report_markdown: string;
  session_id: string;
}

export interface CaseStatusPayload {
  case_id: string;
  status: "UPLOADED" | "PROCESSING" | "COMPLETE" | "FAILED";
  created_at: string;
  has_note: boolean;
  grade?: string;
  cdr_display?: string;
  error?: { stage: string; detail: string };
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
    readonly stage?: string,
  ) {
    super(detail);
  }
}

async function raiseFor(response: Response): Promise<never> {
  let code = "http_error";
  let detail = `${response.status} ${response.statusText}`;
  let stage: string | undefined;
  try {
    const body = await response.json();
    if (typeof body.error === "string") code = body.error;
    if (typeof body.detail === "string") detail = body.detail;
    if (typeof body.stage === "string") stage = body.stage;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, code, detail, stage);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async uploadCase(image: Blob, filename: string, note: string): Promise<string> {
    const form = new FormData();
    form.append("image", image, filename);
    if (note.trim() !== "") form.append("note", note);
    const response = await fetch(`${this.baseUrl}/api/cases`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) await raiseFor(response);
    const body = (await response.json()) as { case_id: string };
    return body.case_id;
  }

  async generateReport(caseId: string): Promise<ReportPayload> {
    const response = await fetch(`${this.baseUrl}/api/cases/${caseId}/report`, {
      method: "POST",
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as ReportPayload;
  }

  async chat(sessionId: string, question: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/sessions/${sessionId}/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (!response.ok) await raiseFor(response);
    const body = (await response.json()) as { answer: string };
    return body.answer;
  }

  async caseStatus(caseId: string): Promise<CaseStatusPayload> {
    const response = await fetch(`${this.baseUrl}/api/cases/${caseId}`);
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as CaseStatusPayload;
  }

  async downloadPdf(caseId: string): Promise<Blob> {
    const response = await fetch(`${this.baseUrl}/api/cases/${caseId}/pdf`);
    if (!response.ok) await raiseFor(response);
    return await response.blob();
  }

  overlayUrl(caseId: string): string {
    return `${this.baseUrl}/api/cases/${caseId}/overlay`;
  }
}
