/**
 * Minimal reader for the toolkit's corpus release format: enough to walk
 * sentences and reconstruct mention spans from IOB runs. Mention ids follow
 * the toolkit's convention `docId:sentenceIndex:start-end`.
 */

export interface CorpusToken {
  surface: string;
  iob: string;
}

export interface CorpusMention {
  mentionId: string;
  documentId: string;
  sentenceIndex: number;
  tokens: string[];
}

interface SentenceBlock {
  meta: Record<string, string>;
  tokens: CorpusToken[];
  firstLine: number;
}

function* blocks(text: string): Generator<SentenceBlock> {
  let meta: Record<string, string> = {};
  let tokens: CorpusToken[] = [];
  let firstLine = 0;
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") {
      if (tokens.length || Object.keys(meta).length) {
        yield { meta, tokens, firstLine };
        meta = {};
        tokens = [];
      }
      continue;
    }
    if (!tokens.length && !Object.keys(meta).length) firstLine = i + 1;
    if (line.startsWith("#")) {
      const sep = line.indexOf(":");
      if (sep < 0) throw new Error(`line ${i + 1}: metadata line without ':'`);
      meta[line.slice(1, sep).trim()] = line.slice(sep + 1);
      continue;
    }
    const cols = line.split("\t");
    if (cols.length < 3) {
      throw new Error(`line ${i + 1}: expected tab-separated token columns`);
    }
    tokens.push({ surface: cols[0], iob: cols[1] });
  }
  if (tokens.length || Object.keys(meta).length) {
    yield { meta, tokens, firstLine };
  }
}

/** Mentions in corpus traversal order (the embedding row order). */
export function extractMentions(text: string): CorpusMention[] {
  const sentenceCounters = new Map<string, number>();
  const mentions: CorpusMention[] = [];
  for (const block of blocks(text)) {
    const documentId = block.meta["document_id"];
    if (!documentId) {
      throw new Error(
        `line ${block.firstLine}: sentence block missing #document_id:`,
      );
    }
    const sentenceIndex = sentenceCounters.get(documentId) ?? 0;
    sentenceCounters.set(documentId, sentenceIndex + 1);
    const tokens = block.tokens;
    let i = 0;
    while (i < tokens.length) {
      const tag = tokens[i].iob;
      if (tag.startsWith("B-")) {
        const kind = tag.slice(2);
        let j = i + 1;
        while (j < tokens.length && tokens[j].iob === `I-${kind}`) j++;
        mentions.push({
          mentionId: `${documentId}:${sentenceIndex}:${i}-${j}`,
          documentId,
          sentenceIndex,
          tokens: tokens.slice(i, j).map((t) => t.surface),
        });
        i = j;
      } else {
        i++;
      }
    }
  }
  return mentions;
}
