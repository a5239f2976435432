import { spawnSync } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { DecisionTreeClassifier } from 'ml-cart';
import { RandomForestClassifier } from 'ml-random-forest';
import { describe, expect, it } from 'vitest';

import { convertModel, nextDown, serializeForest } from '../src/convert.js';
import {
  forestVotes,
  predictForest,
  predictTree,
  validateForest,
  type ForestDoc,
  type LeafNodeDoc,
} from '../src/format.js';

/** Deterministic LCG so the suite is reproducible without toolkit seeds. */
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

function trainingData(rows: number, features: number, seed = 7) {
  const rand = lcg(seed);
  const X: number[][] = [];
  const Y: number[] = [];
  for (let i = 0; i < rows; i++) {
    const x = Array.from({ length: features }, () => rand() * 10);
    X.push(x);
    const score = x[0] - 0.6 * x[1] + 0.3 * x[2] + (rand() - 0.5) * 4;
    Y.push(score > 2.5 ? 1 : 0);
  }
  return { X, Y };
}

function sampleInstances(count: number, features: number, seed = 99) {
  const rand = lcg(seed);
  return Array.from({ length: count }, () =>
    Array.from({ length: features }, () => -1 + rand() * 12),
  );
}

const FEATURES = ['f0', 'f1', 'f2', 'f3', 'f4', 'f5'];

function trainForest(nEstimators: number) {
  const { X, Y } = trainingData(300, FEATURES.length);
  const rf = new RandomForestClassifier({
    nEstimators,
    maxFeatures: 4,
    seed: 17,
    noOOB: true,
    treeOptions: { maxDepth: 6 },
  });
  rf.train(X, Y);
  return rf;
}

describe('nextDown', () => {
  it('turns strict-less routing into <= routing exactly', () => {
    const rand = lcg(3);
    for (let i = 0; i < 5000; i++) {
      const v = (rand() - 0.5) * 20;
      const x = i % 3 === 0 ? v : (rand() - 0.5) * 20;
      expect(x <= nextDown(v)).toBe(x < v);
    }
    expect(nextDown(1)).toBeLessThan(1);
    expect(0 <= nextDown(0)).toBe(false);
  });
});

describe('convertModel', () => {
  it('exports a single stump as a 3-node tree', () => {
    const X = [[0], [1], [2], [3]];
    const Y = [0, 0, 1, 1];
    const rf = new RandomForestClassifier({
      nEstimators: 1,
      maxFeatures: 1,
      seed: 3,
      noOOB: true,
      treeOptions: { maxDepth: 1, minNumSamples: 1 },
    });
    rf.train(X, Y);
    const { forest } = convertModel(rf.toJSON(), ['x'], 'x');
    expect(forest.trees).toHaveLength(1);
    expect(forest.trees[0].nodes).toHaveLength(3);
    expect(forest.trees[0].nodes[0].kind).toBe('split');
  });

  it('keeps per-tree predictions identical to the source estimators', () => {
    const rf = trainForest(10);
    const doc = rf.toJSON() as never as {
      baseModel: { indexes: number[][]; estimators: object[] };
    };
    const { forest } = convertModel(doc, FEATURES, 'f1');
    const samples = sampleInstances(1000, FEATURES.length);
    for (let t = 0; t < 10; t++) {
      const estimator = DecisionTreeClassifier.load(
        doc.baseModel.estimators[t] as never,
      );
      const columns = doc.baseModel.indexes[t];
      const projected = samples.map((row) => columns.map((c) => row[c]));
      const want = estimator.predict(projected);
      for (let i = 0; i < samples.length; i++) {
        expect(predictTree(forest.trees[t], samples[i])).toBe(want[i]);
      }
    }
  });

  it('agrees with source hard votes on 1000 samples, ties documented', () => {
    const rf = trainForest(10);
    const { forest, manifest } = convertModel(rf.toJSON(), FEATURES, 'f1');
    validateForest(forest);
    expect(manifest.feature_names).toHaveLength(manifest.n_features);

    const samples = sampleInstances(1000, FEATURES.length);
    const sourcePreds = rf.predict(samples);
    const divergence: Array<{ index: number; votes: number }> = [];
    for (let i = 0; i < samples.length; i++) {
      const ours = predictForest(forest, samples[i]);
      if (ours !== sourcePreds[i]) {
        divergence.push({ index: i, votes: forestVotes(forest, samples[i]) });
      }
    }
    // the source breaks exact vote ties by estimator order, the portable
    // format votes 0; every divergence must therefore be an exact tie
    for (const entry of divergence) {
      expect(entry.votes * 2).toBe(forest.trees.length);
    }
    expect(divergence.length).toBeLessThan(samples.length / 20);
    const agreement = (samples.length - divergence.length) / samples.length;
    // eslint-disable-next-line no-console
    console.log(
      `forest agreement ${(agreement * 100).toFixed(2)}% ` +
        `(${divergence.length} exact-tie divergences documented)`,
    );
  });

  it('zeroes every leaf count for the repair engine to fill', () => {
    const rf = trainForest(5);
    const { forest } = convertModel(rf.toJSON(), FEATURES, 'f1');
    for (const tree of forest.trees) {
      for (const node of tree.nodes) {
        if (node.kind === 'leaf') {
          const { y1, y0, s1, s0 } = (node as LeafNodeDoc).counts;
          expect(y1 + y0 + s1 + s0).toBe(0);
        }
      }
    }
  });

  it('rejects unfitted and non-binary models', () => {
    expect(() => convertModel({ baseModel: { estimators: [] } }, ['x'], 'x')).toThrow(
      /fitted/,
    );
    const { X } = trainingData(120, 2);
    const y3 = X.map((row) => (row[0] < 3 ? 0 : row[0] < 6 ? 1 : 2));
    const rf = new RandomForestClassifier({
      nEstimators: 3,
      maxFeatures: 2,
      seed: 5,
      noOOB: true,
      treeOptions: { maxDepth: 4 },
    });
    rf.train(X, y3);
    expect(() => convertModel(rf.toJSON(), ['a', 'b'], 'a')).toThrow(/binary/);
  });

  it('rejects feature lists shorter than the used columns', () => {
    const rf = trainForest(3);
    expect(() => convertModel(rf.toJSON(), ['only_one'], 'only_one')).toThrow(
      /outside/,
    );
  });
});

describe('validateForest', () => {
  const minimal = (): ForestDoc => ({
    version: 1,
    n_features: 1,
    feature_names: ['x'],
    sensitive_feature: 'x',
    trees: [
      {
        id: 0,
        flipped: false,
        root: 0,
        nodes: [
          { id: 0, kind: 'split', feature: 0, threshold: 0.5, left: 1, right: 2 },
          { id: 1, kind: 'leaf', pred: 0, flipped: false, counts: { y1: 0, y0: 0, s1: 0, s0: 0 } },
          { id: 2, kind: 'leaf', pred: 1, flipped: false, counts: { y1: 0, y0: 0, s1: 0, s0: 0 } },
        ],
      },
    ],
    metadata: {},
  });

  it('accepts a well-formed document', () => {
    expect(() => validateForest(minimal())).not.toThrow();
  });

  it('rejects dangling children, orphans and bad predictions', () => {
    const dangling = minimal();
    (dangling.trees[0].nodes[0] as { left: number }).left = 9;
    expect(() => validateForest(dangling)).toThrow(/dangling/);

    const orphan = minimal();
    orphan.trees[0].nodes.push({
      id: 3,
      kind: 'leaf',
      pred: 0,
      flipped: false,
      counts: { y1: 0, y0: 0, s1: 0, s0: 0 },
    });
    expect(() => validateForest(orphan)).toThrow(/parents/);

    const badPred = minimal();
    (badPred.trees[0].nodes[1] as { pred: number }).pred = 2;
    expect(() => validateForest(badPred)).toThrow(/prediction/);
  });
});

const pythonProbe = spawnSync('python3', ['-c', 'import fairforest'], {
  encoding: 'utf-8',
});
const havePrimary = pythonProbe.status === 0;

describe.skipIf(!havePrimary)('round trip through the repair engine', () => {
  it('exported file passes the deserializer and predicts identically', () => {
    const rf = trainForest(10);
    const { forest } = convertModel(rf.toJSON(), FEATURES, 'f1');
    const dir = mkdtempSync(join(tmpdir(), 'bridge-'));
    const forestPath = join(dir, 'forest.json');
    const samplesPath = join(dir, 'samples.json');
    const samples = sampleInstances(1000, FEATURES.length);
    writeFileSync(forestPath, serializeForest(forest) + '\n');
    writeFileSync(samplesPath, JSON.stringify(samples));

    const script = [
      'import json, sys',
      'import fairforest as ff',
      'forest = ff.load_forest(sys.argv[1])',
      'X = json.load(open(sys.argv[2]))',
      'print(json.dumps([ff.predict_forest(forest, x) for x in X]))',
    ].join('\n');
    const py = spawnSync('python3', ['-c', script, forestPath, samplesPath], {
      encoding: 'utf-8',
    });
    expect(py.stderr).toBe('');
    expect(py.status).toBe(0);
    const enginePreds: number[] = JSON.parse(py.stdout);
    for (let i = 0; i < samples.length; i++) {
      expect(enginePreds[i]).toBe(predictForest(forest, samples[i]));
    }
  });
});
