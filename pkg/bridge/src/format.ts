/**
 * Portable forest document: the JSON interchange format understood by the
 * repair engine. Node ids are dense (0..n-1); a split sends an instance
 * left iff instance[feature] <= threshold; forest prediction is a majority
 * vote with exact ties voting 0.
 */

export interface SplitNodeDoc {
  id: number;
  kind: 'split';
  feature: number;
  threshold: number;
  left: number;
  right: number;
}

export interface LeafNodeDoc {
  id: number;
  kind: 'leaf';
  pred: 0 | 1;
  flipped: boolean;
  counts: { y1: number; y0: number; s1: number; s0: number };
}

export type NodeDoc = SplitNodeDoc | LeafNodeDoc;

export interface TreeDoc {
  id: number;
  flipped: boolean;
  root: number;
  nodes: NodeDoc[];
}

export interface ForestDoc {
  version: 1;
  n_features: number;
  feature_names: string[];
  sensitive_feature: string;
  trees: TreeDoc[];
  metadata: Record<string, unknown>;
}

export class FormatError extends Error {}

/** Structural validation mirroring the format contract. */
export function validateForest(doc: ForestDoc): void {
  if (doc.version !== 1) {
    throw new FormatError(`unsupported format version ${doc.version}`);
  }
  if (doc.feature_names.length !== doc.n_features) {
    throw new FormatError(
      `${doc.feature_names.length} feature names for ${doc.n_features} features`,
    );
  }
  for (const tree of doc.trees) {
    validateTree(tree, doc.n_features);
  }
}

function validateTree(tree: TreeDoc, nFeatures: number): void {
  const n = tree.nodes.length;
  if (n === 0) throw new FormatError(`tree ${tree.id}: has no nodes`);
  const seen = new Array<boolean>(n).fill(false);
  const parents = new Array<number>(n).fill(0);
  for (const node of tree.nodes) {
    if (!Number.isInteger(node.id) || node.id < 0 || node.id >= n) {
      throw new FormatError(`tree ${tree.id}: node id ${node.id} outside 0..${n - 1}`);
    }
    if (seen[node.id]) {
      throw new FormatError(`tree ${tree.id}: duplicate node id ${node.id}`);
    }
    seen[node.id] = true;
    if (node.kind === 'split') {
      for (const child of [node.left, node.right]) {
        if (!Number.isInteger(child) || child < 0 || child >= n) {
          throw new FormatError(
            `tree ${tree.id}: node ${node.id} has dangling child id ${child}`,
          );
        }
        parents[child] += 1;
      }
      if (node.left === node.right) {
        throw new FormatError(`tree ${tree.id}: node ${node.id} repeats a child id`);
      }
      if (node.feature < 0 || node.feature >= nFeatures) {
        throw new FormatError(
          `tree ${tree.id}: node ${node.id} splits on feature ${node.feature}` +
            ` outside 0..${nFeatures - 1}`,
        );
      }
      if (!Number.isFinite(node.threshold)) {
        throw new FormatError(`tree ${tree.id}: node ${node.id} has bad threshold`);
      }
    } else if (node.kind === 'leaf') {
      if (node.pred !== 0 && node.pred !== 1) {
        throw new FormatError(
          `tree ${tree.id}: node ${node.id} has prediction ${node.pred}`,
        );
      }
      const { y1, y0, s1, s0 } = node.counts;
      if (Math.min(y1, y0, s1, s0) < 0) {
        throw new FormatError(`tree ${tree.id}: node ${node.id} has negative counts`);
      }
    } else {
      throw new FormatError(
        `tree ${tree.id}: node ${(node as NodeDoc).id} has unknown kind`,
      );
    }
  }
  if (tree.root < 0 || tree.root >= n) {
    throw new FormatError(`tree ${tree.id}: root ${tree.root} is not a node id`);
  }
  if (parents[tree.root] !== 0) {
    throw new FormatError(`tree ${tree.id}: root ${tree.root} has a parent`);
  }
  for (let i = 0; i < n; i++) {
    if (i !== tree.root && parents[i] !== 1) {
      throw new FormatError(
        `tree ${tree.id}: node ${i} has ${parents[i]} parents, expected 1`,
      );
    }
  }
}

/** Route one instance to a leaf id; `<=` goes left. */
export function routeTree(tree: TreeDoc, instance: number[]): number {
  const byId = tree.nodes;
  let node = byId[tree.root];
  while (node.kind === 'split') {
    node = instance[node.feature] <= node.threshold ? byId[node.left] : byId[node.right];
  }
  return node.id;
}

export function predictTree(tree: TreeDoc, instance: number[]): 0 | 1 {
  const leaf = tree.nodes[routeTree(tree, instance)] as LeafNodeDoc;
  return leaf.pred;
}

/** Majority vote across trees; an exact tie votes 0. */
export function predictForest(doc: ForestDoc, instance: number[]): 0 | 1 {
  let votes = 0;
  for (const tree of doc.trees) votes += predictTree(tree, instance);
  return 2 * votes > doc.trees.length ? 1 : 0;
}

export function forestVotes(doc: ForestDoc, instance: number[]): number {
  let votes = 0;
  for (const tree of doc.trees) votes += predictTree(tree, instance);
  return votes;
}
