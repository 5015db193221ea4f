#!/usr/bin/env node
/** CLI: embed-export export --model <name> --pooling <mode> --in <file> --out <file> */

import { realpathSync } from 'node:fs';
import { pathToFileURL } from 'node:url';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { runExport } from './export.js';
import { PoolingMode } from './pooling.js';

export async function main(argv: string[]): Promise<number> {
  const parser = yargs(argv)
    .command('export', 'embed prepared examples into an RPEMB1 file', (cmd) =>
      cmd
        .option('model', {
          type: 'string',
          demandOption: true,
          describe: 'checkpoint name, or hash-<dim> for the built-in offline encoder',
        })
        .option('pooling', {
          type: 'string',
          choices: ['mean', 'cls'] as const,
          default: 'mean',
          describe: 'token-state pooling for checkpoint encoders',
        })
        .option('in', {
          type: 'string',
          demandOption: true,
          describe: 'prepared example file (JSON lines)',
        })
        .option('out', { type: 'string', demandOption: true, describe: 'output RPEMB1 path' })
        .option('batch-size', { type: 'number', default: 32 }),
    )
    .demandCommand(1)
    .strict()
    .help();

  const args = await parser.parse();
  try {
    const report = await runExport({
      model: args.model as string,
      pooling: args.pooling as PoolingMode,
      input: args['in'] as string,
      output: args.out as string,
      batchSize: args['batch-size'] as number,
    });
    console.error(
      `exported ${report.count} embeddings (dim ${report.dim}, ${report.truncated} truncated) to ${report.output}`,
    );
    console.log(JSON.stringify(report));
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

function invokedDirectly(): boolean {
  if (!process.argv[1]) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return import.meta.url.endsWith(process.argv[1].split('/').pop()!);
  }
}

if (invokedDirectly()) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
