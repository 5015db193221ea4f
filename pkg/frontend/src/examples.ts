/** Reader for prepared example files (one JSON object per line). */

import { readFileSync } from 'node:fs';

export interface PreparedExample {
  example_id: string;
  dataset_id: string;
  recipient_id: string;
  label: string;
  text: string;
}

export function readExamples(path: string): PreparedExample[] {
  const content = readFileSync(path, 'utf-8');
  const examples: PreparedExample[] = [];
  const seen = new Set<string>();
  content.split('\n').forEach((line, index) => {
    if (!line.trim()) return;
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${index + 1}: not valid JSON`);
    }
    for (const key of ['example_id', 'dataset_id', 'recipient_id', 'label', 'text']) {
      if (typeof obj[key] !== 'string') {
        throw new Error(`${path}:${index + 1}: missing or non-string field ${key}`);
      }
    }
    const ex = obj as unknown as PreparedExample;
    if (seen.has(ex.example_id)) {
      throw new Error(`${path}:${index + 1}: duplicate example_id ${ex.example_id}`);
    }
    seen.add(ex.example_id);
    examples.push(ex);
  });
  return examples;
}
