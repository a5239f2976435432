/**
 * Export script: serialized fitted model in, portable forest JSON out.
 *
 *   node dist/cli.js --model rf.json --features names.json \
 *       --sensitive sex --out forest.json [--manifest manifest.json]
 *
 * `--model` is the JSON produced by RandomForestClassifier.toJSON();
 * `--features` is a JSON array file or a comma-separated list naming the
 * original training columns in order.
 */

import { readFileSync, writeFileSync } from 'node:fs';
import { exit } from 'node:process';
import { pathToFileURL } from 'node:url';

import { convertModel, ExportError, serializeForest } from './convert.js';
import { FormatError } from './format.js';

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new ExportError(`malformed arguments near ${key}`);
    }
    args.set(key.slice(2), value);
  }
  for (const required of ['model', 'features', 'sensitive', 'out']) {
    if (!args.has(required)) {
      throw new ExportError(`missing required argument --${required}`);
    }
  }
  return args;
}

function readFeatures(spec: string): string[] {
  if (spec.endsWith('.json')) {
    const parsed = JSON.parse(readFileSync(spec, 'utf-8'));
    if (!Array.isArray(parsed) || !parsed.every((x) => typeof x === 'string')) {
      throw new ExportError(`${spec} must contain a JSON array of strings`);
    }
    return parsed;
  }
  return spec.split(',').map((s) => s.trim());
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const modelDoc = JSON.parse(readFileSync(args.get('model')!, 'utf-8'));
    const features = readFeatures(args.get('features')!);
    const outPath = args.get('out')!;
    const { forest, manifest } = convertModel(
      modelDoc,
      features,
      args.get('sensitive')!,
      outPath,
    );
    writeFileSync(outPath, serializeForest(forest) + '\n');
    const manifestPath = args.get('manifest') ?? outPath + '.manifest.json';
    writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
    console.log(
      `exported ${manifest.source.n_estimators} trees over ` +
        `${manifest.n_features} features to ${outPath}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof ExportError || err instanceof FormatError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  exit(main(process.argv.slice(2)));
}
