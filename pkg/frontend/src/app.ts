/**
 * DOM wiring: left column = upload + case metadata, right column = report,
 * bottom dock = follow-up chat. All behavior flows through ConsoleStore.
 */

import { ApiClient } from "./api.js";
import { renderMarkdown } from "./markdown.js";
import { ConsoleStore, ConsoleState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function mountConsole(root: Document = document): ConsoleStore {
  const store = new ConsoleStore(new ApiClient(""));

  const fileInput = el<HTMLInputElement>("image-input");
  const noteInput = el<HTMLTextAreaElement>("note-input");
  const sendButton = el<HTMLButtonElement>("send-button");
  const downloadButton = el<HTMLButtonElement>("download-button");
  const banner = el<HTMLDivElement>("error-banner");
  const metadata = el<HTMLDivElement>("case-metadata");
  const overlayImg = el<HTMLImageElement>("overlay-thumb");
  const reportView = el<HTMLDivElement>("report-view");
  const subReportsView = el<HTMLDivElement>("sub-reports");
  const chatLog = el<HTMLDivElement>("chat-log");
  const chatInput = el<HTMLInputElement>("chat-input");
  const askButton = el<HTMLButtonElement>("ask-button");
  const phaseTag = el<HTMLSpanElement>("phase-tag");

  const render = (state: ConsoleState) => {
    phaseTag.textContent = state.phase;
    phaseTag.dataset.phase = state.phase;

    const busy = state.phase === "UPLOADING" || state.phase === "GENERATING";
    sendButton.disabled = busy || fileInput.files?.length !== 1;
    sendButton.textContent = busy ? "Working..." : "Send to LLM";

    const ready = state.phase === "REPORT_READY";
    chatInput.disabled = !ready || state.chatPending;
    askButton.disabled = !ready || state.chatPending;
    downloadButton.hidden = !ready;

    banner.hidden = state.errorBanner === null;
    banner.textContent = state.errorBanner ?? "";

    if (ready && state.grade !== null) {
      metadata.hidden = false;
      metadata.replaceChildren();
      for (const [label, value] of [
        ["Diagnostic grade", state.grade],
        ["Cup-to-disc ratio", state.cdrDisplay ?? ""],
        ["Specialists", state.roles.join(", ")],
      ]) {
        const row = root.createElement("div");
        const term = root.createElement("strong");
        term.textContent = `${label}: `;
        row.appendChild(term);
        row.appendChild(root.createTextNode(value));
        metadata.appendChild(row);
      }
      if (state.overlayUrl !== null && overlayImg.src !== state.overlayUrl) {
        overlayImg.src = state.overlayUrl;
        overlayImg.hidden = false;
      }
    } else {
      metadata.hidden = true;
      overlayImg.hidden = true;
    }

    if (ready && state.reportMarkdown !== null) {
      renderMarkdown(reportView, state.reportMarkdown);
      subReportsView.replaceChildren();
      for (const sub of state.subReports) {
        const section = root.createElement("section");
        const heading = root.createElement("h3");
        heading.textContent = sub.role;
        section.appendChild(heading);
        const body = root.createElement("p");
        body.textContent = sub.text;
        section.appendChild(body);
        subReportsView.appendChild(section);
      }
    } else {
      reportView.replaceChildren();
      subReportsView.replaceChildren();
    }

    chatLog.replaceChildren();
    for (const exchange of state.chatLog) {
      const q = root.createElement("div");
      q.className = "chat-question";
      q.textContent = exchange.question;
      const a = root.createElement("div");
      a.className = "chat-answer";
      a.textContent = exchange.answer;
      chatLog.append(q, a);
    }
    chatLog.scrollTop = chatLog.scrollHeight;
  };

  store.subscribe(render);
  render(store.getState());

  fileInput.addEventListener("change", () => render(store.getState()));

  sendButton.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    void store.uploadAndGenerate(file, file.name, noteInput.value);
  });

  askButton.addEventListener("click", () => {
    const question = chatInput.value.trim();
    if (question === "") return;
    void store.ask(question).then((ok) => {
      if (ok) chatInput.value = ""; // keep the text for retry on failure
    });
  });
  chatInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") askButton.click();
  });

  downloadButton.addEventListener("click", () => {
    void store.fetchPdf().then((result) => {
      if (result === null) return;
      const url = URL.createObjectURL(result.blob);
      const anchor = root.createElement("a");
      anchor.href = url;
      anchor.download = result.filename;
      anchor.click();
      URL.revokeObjectURL(url);
    });
  });

  return store;
}

if (typeof document !== "undefined" && document.getElementById("send-button")) {
  mountConsole();
}
