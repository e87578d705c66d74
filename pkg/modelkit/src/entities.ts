/** Rule-based entity tagger served at /entities: capitalized token runs
 * (NAME) and four-digit numbers (DATE), offsets into the raw text. */

export interface Mention {
  surface: string;
  label: string;
  char_start: number;
  char_end: number;
}

const CAP_RUN = /(?<![\w'])[A-Z][A-Za-z']*(?: [A-Z][A-Za-z']*)*/g;
const YEAR = /(?<!\d)\d{4}(?!\d)/g;

export function annotateEntities(text: string): Mention[] {
  const mentions: Mention[] = [];
  for (const m of text.matchAll(CAP_RUN)) {
    mentions.push({
      surface: m[0],
      label: "NAME",
      char_start: m.index!,
      char_end: m.index! + m[0].length,
    });
  }
  for (const m of text.matchAll(YEAR)) {
    mentions.push({
      surface: m[0],
      label: "DATE",
      char_start: m.index!,
      char_end: m.index! + m[0].length,
    });
  }
  mentions.sort((a, b) => a.char_start - b.char_start || a.char_end - b.char_end);
  return mentions;
}
