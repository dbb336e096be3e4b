import fs from 'fs'
import path from 'path'
import * as tf from '@tensorflow/tfjs'
import { ModelLoadError } from './errors.js'

// Minimal filesystem IO for LayersModels: the standard tfjs layout of a
// model.json (topology + weightsManifest) next to binary weight shards.
// tfjs without the node bindings registers no file:// handlers, so these
// custom handlers stand in.

export async function saveModelToDir(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      const weightData = artifacts.weightData as ArrayBuffer
      const spec = {
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(spec))
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      }
    }),
  )
}

function dirLoadHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const specPath = path.join(dir, 'model.json')
      let spec: any
      try {
        spec = JSON.parse(fs.readFileSync(specPath, 'utf8'))
      } catch (err) {
        throw new ModelLoadError(`${specPath}: ${(err as Error).message}`)
      }
      if (!spec.modelTopology || !Array.isArray(spec.weightsManifest)) {
        throw new ModelLoadError(`${specPath}: not a layers-model spec`)
      }
      const weightSpecs: tf.io.WeightsManifestEntry[] = []
      const shards: Buffer[] = []
      for (const group of spec.weightsManifest) {
        weightSpecs.push(...group.weights)
        for (const rel of group.paths) {
          const shardPath = path.join(dir, rel)
          try {
            shards.push(fs.readFileSync(shardPath))
          } catch (err) {
            throw new ModelLoadError(`${shardPath}: ${(err as Error).message}`)
          }
        }
      }
      const weightData = Buffer.concat(shards)
      return {
        modelTopology: spec.modelTopology,
        weightSpecs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      }
    },
  }
}

/** model spec: a directory holding model.json + weight shards */
export async function loadModelFromDir(dir: string): Promise<tf.LayersModel> {
  if (!fs.existsSync(path.join(dir, 'model.json'))) {
    throw new ModelLoadError(`${dir}: no model.json found`)
  }
  try {
    return await tf.loadLayersModel(dirLoadHandler(dir))
  } catch (err) {
    if (err instanceof ModelLoadError) throw err
    throw new ModelLoadError(`${dir}: ${(err as Error).message}`)
  }
}
