export {
  convertModel,
  ExportError,
  nextDown,
  serializeForest,
  type ExportManifest,
} from './convert.js';
export {
  FormatError,
  forestVotes,
  predictForest,
  predictTree,
  routeTree,
  validateForest,
  type ForestDoc,
  type LeafNodeDoc,
  type NodeDoc,
  type SplitNodeDoc,
  type TreeDoc,
} from './format.js';
