/**
 * Convert a fitted ml-random-forest classifier (its toJSON document) into
 * the portable forest format.
 *
 * Source semantics and how they map:
 *  - ml-cart routes left on `value < splitValue`; the portable format
 *    routes left on `value <= threshold`. Thresholds are therefore
 *    exported as nextDown(splitValue), the largest double strictly below
 *    the split value, which preserves every routing decision exactly.
 *  - Each estimator sees a column subset (`indexes`); split columns are
 *    remapped to the original feature indices.
 *  - Leaf prediction is the class with the larger training share at the
 *    leaf, ties to class 0 — the same rule ml-cart's argmax applies.
 *  - Leaf counts are written as zeros on purpose: the repair engine
 *    recomputes them from the caller's repair dataset.
 *  - The source forest aggregates by array mode, which breaks vote ties
 *    toward the earliest estimator; the portable format's vote breaks
 *    ties toward class 0. Predictions can differ only on exact vote
 *    ties, which the manifest records under `aggregation`.
 */

import {
  ForestDoc,
  LeafNodeDoc,
  NodeDoc,
  SplitNodeDoc,
  validateForest,
} from './format.js';

export class ExportError extends Error {}

export interface ExportManifest {
  source: {
    toolkit: string;
    n_estimators: number;
    max_depth: number | null;
    aggregation: string;
  };
  n_features: number;
  feature_names: string[];
  sensitive_feature: string;
  label_mapping: string;
  target_file: string;
}

interface CartNode {
  splitValue?: number;
  splitColumn?: number;
  left?: CartNode;
  right?: CartNode;
  distribution?: number[][];
}

interface BaseModel {
  indexes: number[][];
  nEstimators: number;
  isClassifier: boolean;
  treeOptions?: { maxDepth?: number };
  estimators: Array<{ root: CartNode }>;
}

const f64 = new Float64Array(1);
const u64 = new BigUint64Array(f64.buffer);

/** Largest double strictly below x. */
export function nextDown(x: number): number {
  if (Number.isNaN(x) || !Number.isFinite(x)) {
    throw new ExportError(`cannot shift non-finite split value ${x}`);
  }
  if (x === 0) {
    u64[0] = 0x8000000000000001n; // -minimal subnormal
    return f64[0];
  }
  f64[0] = x;
  u64[0] = x > 0 ? u64[0] - 1n : u64[0] + 1n;
  return f64[0];
}

function unwrapBaseModel(modelDoc: unknown): BaseModel {
  if (typeof modelDoc !== 'object' || modelDoc === null) {
    throw new ExportError('model document is not an object');
  }
  // normalize to the plain serialized form: live toJSON() output still
  // holds Matrix instances where the JSON document has nested arrays
  const doc = JSON.parse(JSON.stringify(modelDoc)) as Record<string, unknown>;
  const base = (doc.baseModel ?? doc) as Partial<BaseModel>;
  if (!Array.isArray(base.estimators) || base.estimators.length === 0) {
    throw new ExportError('model has no fitted estimators (is it trained?)');
  }
  if (base.isClassifier === false) {
    throw new ExportError('model is a regressor, expected a binary classifier');
  }
  return base as BaseModel;
}

function leafPrediction(distribution: number[][] | undefined, where: string): 0 | 1 {
  const row = distribution?.[0];
  if (!row || row.length === 0) {
    throw new ExportError(`${where}: leaf carries no class distribution`);
  }
  if (row.length > 2) {
    throw new ExportError(
      `${where}: ${row.length} classes, expected a binary classifier`,
    );
  }
  const p0 = row[0] ?? 0;
  const p1 = row[1] ?? 0;
  return p1 > p0 ? 1 : 0;
}

function convertTree(
  root: CartNode,
  columns: number[] | undefined,
  nFeatures: number,
  treeId: number,
): NodeDoc[] {
  const nodes: NodeDoc[] = [];

  const build = (node: CartNode): number => {
    const id = nodes.length;
    const isSplit =
      node.left !== undefined &&
      node.right !== undefined &&
      node.splitValue !== undefined &&
      node.splitColumn !== undefined;
    if (isSplit) {
      const placeholder: SplitNodeDoc = {
        id,
        kind: 'split',
        feature: -1,
        threshold: 0,
        left: -1,
        right: -1,
      };
      nodes.push(placeholder);
      const feature = columns ? columns[node.splitColumn!] : node.splitColumn!;
      if (feature === undefined || feature < 0 || feature >= nFeatures) {
        throw new ExportError(
          `tree ${treeId}: split column ${node.splitColumn} maps to ` +
            `feature ${feature}, outside the ${nFeatures} declared features`,
        );
      }
      placeholder.feature = feature;
      placeholder.threshold = nextDown(node.splitValue!);
      placeholder.left = build(node.left!);
      placeholder.right = build(node.right!);
    } else {
      const leaf: LeafNodeDoc = {
        id,
        kind: 'leaf',
        pred: leafPrediction(node.distribution, `tree ${treeId} node ${id}`),
        flipped: false,
        counts: { y1: 0, y0: 0, s1: 0, s0: 0 },
      };
      nodes.push(leaf);
    }
    return id;
  };

  build(root);
  return nodes;
}

export function convertModel(
  modelDoc: unknown,
  featureNames: string[],
  sensitiveName: string,
  targetFile = '',
): { forest: ForestDoc; manifest: ExportManifest } {
  const base = unwrapBaseModel(modelDoc);
  const nFeatures = featureNames.length;

  const forest: ForestDoc = {
    version: 1,
    n_features: nFeatures,
    feature_names: featureNames,
    sensitive_feature: sensitiveName,
    trees: base.estimators.map((estimator, i) => ({
      id: i,
      flipped: false,
      root: 0,
      nodes: convertTree(estimator.root, base.indexes?.[i], nFeatures, i),
    })),
    metadata: {
      exported_from: 'ml-random-forest',
      n_estimators: base.estimators.length,
    },
  };
  validateForest(forest);

  const manifest: ExportManifest = {
    source: {
      toolkit: 'ml-random-forest',
      n_estimators: base.estimators.length,
      max_depth: base.treeOptions?.maxDepth ?? null,
      aggregation:
        'hard majority vote; ties resolved by array mode (first estimator ' +
        'class), while the portable format votes 0 on exact ties',
    },
    n_features: nFeatures,
    feature_names: featureNames,
    sensitive_feature: sensitiveName,
    label_mapping: 'classes must already be encoded 0/1 with 1 favorable',
    target_file: targetFile,
  };
  return { forest, manifest };
}

export function serializeForest(doc: ForestDoc): string {
  // field order matches the reference writer, byte-reproducible output
  return JSON.stringify(doc);
}
