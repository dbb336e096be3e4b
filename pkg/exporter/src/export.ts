import fs from 'fs'
import path from 'path'
import * as tf from '@tensorflow/tfjs'
import { imageToTensor, readImageList, Normalization } from './images.js'
import { loadModelFromDir } from './modelio.js'
import { probeFeatureExtractor, runBatch } from './extract.js'
import { writeTensorFile } from './ptns.js'

export interface ExportJob {
  /** directory holding model.json + weight shards */
  modelSpec: string
  /** file of image paths (+ optional labels), one per line */
  imageList: string
  outputDir: string
  includeProbs?: boolean
  /** square input side; images are resized to imageSize x imageSize */
  imageSize?: number
  normalization?: Normalization
  modelId?: string
  targetId?: string
  batchSize?: number
}

export interface ExportResult {
  featurePath: string
  probPath: string | null
  fragmentPath: string
  imageCount: number
  featureDim: number
  numClasses: number
  depthLayers: number
}

function atomicWriteJson(file: string, value: unknown): void {
  const tmp = file + '.tmp'
  fs.writeFileSync(tmp, JSON.stringify(value, null, 2) + '\n')
  fs.renameSync(tmp, file)
}

export async function exportFeatures(job: ExportJob): Promise<ExportResult> {
  const imageSize = job.imageSize ?? 224
  const normalization = job.normalization ?? 'imagenet'
  const batchSize = job.batchSize ?? 16
  if (!Number.isInteger(imageSize) || imageSize < 1) {
    throw new Error(`image size must be a positive integer, got ${imageSize}`)
  }
  const modelId = job.modelId ?? path.basename(path.resolve(job.modelSpec))
  const targetId = job.targetId ?? 'target'

  const entries = readImageList(job.imageList)
  const listDir = path.dirname(path.resolve(job.imageList))
  const model = await loadModelFromDir(job.modelSpec)
  const probe = probeFeatureExtractor(model)

  const n = entries.length
  const features = new Float32Array(n * probe.featureDim)
  const probs = new Float32Array(n * probe.numClasses)
  for (let start = 0; start < n; start += batchSize) {
    const slice = entries.slice(start, start + batchSize)
    const batch = tf.tidy(() => {
      const images = slice.map(entry => {
        const file = path.isAbsolute(entry.path) ? entry.path : path.join(listDir, entry.path)
        return imageToTensor(file, imageSize, normalization)
      })
      return tf.stack(images) as tf.Tensor4D
    })
    const result = runBatch(probe, batch)
    batch.dispose()
    features.set(result.features, start * probe.featureDim)
    probs.set(result.probs, start * probe.numClasses)
  }

  fs.mkdirSync(job.outputDir, { recursive: true })
  const featurePath = path.join(job.outputDir, 'features.ptns')
  writeTensorFile({ dtype: 'f32', shape: [n, probe.featureDim], data: features }, featurePath)
  let probPath: string | null = null
  if (job.includeProbs) {
    probPath = path.join(job.outputDir, 'probs.ptns')
    writeTensorFile({ dtype: 'f32', shape: [n, probe.numClasses], data: probs }, probPath)
  }

  const labels = entries.map(entry => entry.label)
  const fragment = {
    models: [
      {
        model_id: modelId,
        depth_layers: probe.depthLayers,
        source_dataset_size: 1,
        architecture: model.name,
        source_dataset: '',
        pretext_task: 'classification',
      },
    ],
    artifacts: {
      [modelId]: {
        [targetId]: {
          feature_path: 'features.ptns',
          ...(probPath ? { prob_path: 'probs.ptns' } : {}),
        },
      },
    },
    preprocessing: {
      image_size: imageSize,
      normalization,
      pooled_spatial_features: probe.pooled,
    },
    images: {
      count: n,
      labels: labels.every(label => label !== null) ? labels : null,
    },
  }
  const fragmentPath = path.join(job.outputDir, 'manifest-fragment.json')
  atomicWriteJson(fragmentPath, fragment)

  return {
    featurePath,
    probPath,
    fragmentPath,
    imageCount: n,
    featureDim: probe.featureDim,
    numClasses: probe.numClasses,
    depthLayers: probe.depthLayers,
  }
}
