/**
 * Tiny Markdown renderer for model output. Parses to a block tree and
 * builds DOM via createElement/textContent only, so report text is never
 * injected as live markup (a literal "<script>" stays literal).
 *
 * Supported: #/##/### headings, "- " bullets, paragraphs, **bold** spans.
 */

export type Inline = { bold: boolean; text: string };

export type Block =
  | { kind: "heading"; level: 1 | 2 | 3; spans: Inline[] }
  | { kind: "bullets"; items: Inline[][] }
  | { kind: "paragraph"; spans: Inline[] };

export function parseInline(text: string): Inline[] {
  const spans: Inline[] = [];
  const parts = text.split(/\*\*/);
  parts.forEach((part, i) => {
    if (part === "") return;
    // odd segments sit between ** pairs; an unpaired trailing ** is literal
    const bold = i % 2 === 1 && i < parts.length - (parts.length % 2 === 0 ? 1 : 0);
    spans.push(bold ? { bold: true, text: part } : { bold: false, text: part });
  });
  return spans;
}

export function parseMarkdown(markdown: string): Block[] {
  const blocks: Block[] = [];
  let paragraph: string[] = [];
  let bullets: Inline[][] | null = null;

  const flushParagraph = () => {
    if (paragraph.length > 0) {
      blocks.push({ kind: "paragraph", spans: parseInline(paragraph.join(" ")) });
      paragraph = [];
    }
  };
  const flushBullets = () => {
    if (bullets !== null) {
      blocks.push({ kind: "bullets", items: bullets });
      bullets = null;
    }
  };

  for (const raw of markdown.split(/\r?\n/)) {
    const line = raw.trim();
    const headingMatch = line.match(/^(#{1,3}) (.*)$/);
    if (line === "") {
      flushParagraph();
      flushBullets();
    } else if (headingMatch) {
      flushParagraph();
      flushBullets();
      blocks.push({
        kind: "heading",
        level: headingMatch[1].length as 1 | 2 | 3,
        spans: parseInline(headingMatch[2]),
      });
    } else if (line.startsWith("- ") || line.startsWith("* ")) {
      flushParagraph();
      bullets = bullets ?? [];
      bullets.push(parseInline(line.slice(2)));
    } else {
      flushBullets();
      paragraph.push(line);
    }
  }
  flushParagraph();
  flushBullets();
  return blocks;
}

function applyInline(parent: HTMLElement, spans: Inline[]): void {
  for (const span of spans) {
    if (span.bold) {
      const strong = document.createElement("strong");
      strong.textContent = span.text;
      parent.appendChild(strong);
    } else {
      parent.appendChild(document.createTextNode(span.text));
    }
  }
}

/** Render markdown into `target`, replacing its contents. */
export function renderMarkdown(target: HTMLElement, markdown: string): void {
  target.replaceChildren();
  for (const block of parseMarkdown(markdown)) {
    if (block.kind === "heading") {
      const el = document.createElement(`h${block.level + 1}`); // page h1 is reserved
      applyInline(el as HTMLElement, block.spans);
      target.appendChild(el);
    } else if (block.kind === "bullets") {
      const ul = document.createElement("ul");
      for (const item of block.items) {
        const li = document.createElement("li");
        applyInline(li, item);
        ul.appendChild(li);
      }
      target.appendChild(ul);
    } else {
      const p = document.createElement("p");
      applyInline(p, block.spans);
      target.appendChild(p);
    }
  }
}
