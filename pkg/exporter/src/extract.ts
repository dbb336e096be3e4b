import * as tf from '@tensorflow/tfjs'
import { ShapeProbeError } from './errors.js'

const WEIGHTED_LAYERS = new Set([
  'Conv1D',
  'Conv2D',
  'Conv3D',
  'DepthwiseConv2D',
  'SeparableConv2D',
  'Dense',
])

/** layer count in the capacity-heuristic sense: conv + dense layers */
export function countDepthLayers(model: tf.LayersModel): number {
  let depth = 0
  for (const layer of model.layers) {
    if (WEIGHTED_LAYERS.has(layer.getClassName())) depth++
  }
  return depth
}

export interface FeatureProbe {
  /** two-headed model: [penultimate features, class probabilities] */
  extractor: tf.LayersModel
  featureDim: number
  numClasses: number
  depthLayers: number
  pooled: boolean
}

/**
 * Identify the classifier head (the last Dense layer) and build a model
 * that outputs its input, globally average-pooled when spatial, alongside
 * the softmax class probabilities.
 */
export function probeFeatureExtractor(model: tf.LayersModel): FeatureProbe {
  let classifier: tf.layers.Layer | null = null
  for (const layer of model.layers) {
    if (layer.getClassName() === 'Dense') classifier = layer
  }
  if (!classifier) {
    throw new ShapeProbeError('no Dense classifier layer found; cannot locate penultimate features')
  }
  const input = classifier.input
  if (Array.isArray(input)) {
    throw new ShapeProbeError('classifier layer has multiple inputs')
  }
  let features = input as tf.SymbolicTensor
  let pooled = false
  if (features.shape.length === 4) {
    features = tf.layers
      .globalAveragePooling2d({ name: 'exporter_gap' })
      .apply(features) as tf.SymbolicTensor
    pooled = true
  } else if (features.shape.length !== 2) {
    throw new ShapeProbeError(
      `penultimate tensor has unsupported rank ${features.shape.length}`,
    )
  }
  const featureDim = features.shape[features.shape.length - 1]
  if (typeof featureDim !== 'number' || featureDim < 1) {
    throw new ShapeProbeError('penultimate width is not statically known')
  }

  let probs = model.outputs[0]
  const activation = (classifier.getConfig() as { activation?: string }).activation
  if (activation !== 'softmax') {
    probs = tf.layers
      .activation({ activation: 'softmax', name: 'exporter_softmax' })
      .apply(classifier.output) as tf.SymbolicTensor
  }
  const numClasses = probs.shape[probs.shape.length - 1]
  if (typeof numClasses !== 'number' || numClasses < 1) {
    throw new ShapeProbeError('classifier width is not statically known')
  }

  const extractor = tf.model({
    inputs: model.inputs,
    outputs: [features, probs],
  })
  return {
    extractor,
    featureDim,
    numClasses,
    depthLayers: countDepthLayers(model),
    pooled,
  }
}

export interface InferenceResult {
  features: Float32Array
  probs: Float32Array
}

/** run one batch in inference mode; returns row-major [n, d] and [n, z] */
export function runBatch(probe: FeatureProbe, batch: tf.Tensor4D): InferenceResult {
  const [features, probs] = tf.tidy(
    () => probe.extractor.predict(batch, { batchSize: batch.shape[0] }) as tf.Tensor[],
  )
  const out = {
    features: features.dataSync() as Float32Array,
    probs: probs.dataSync() as Float32Array,
  }
  features.dispose()
  probs.dispose()
  return out
}
