export { exportFeatures } from './export.js'
export type { ExportJob, ExportResult } from './export.js'
export { decodeImage, imageToTensor, readImageList } from './images.js'
export type { DecodedImage, ImageListEntry, Normalization } from './images.js'
export { countDepthLayers, probeFeatureExtractor, runBatch } from './extract.js'
export type { FeatureProbe } from './extract.js'
export { loadModelFromDir, saveModelToDir } from './modelio.js'
export { decodeTensor, encodeTensor, readTensorFile, writeTensorFile } from './ptns.js'
export type { PtnsDtype, PtnsTensor } from './ptns.js'
export {
  ImageDecodeError,
  ModelLoadError,
  ShapeProbeError,
  TensorFormatError,
} from './errors.js'
