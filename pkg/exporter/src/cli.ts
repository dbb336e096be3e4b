#!/usr/bin/env node
import { parseArgs } from 'node:util'
import { exportFeatures } from './export.js'
import { Normalization } from './images.js'
import { ImageDecodeError, ModelLoadError, ShapeProbeError } from './errors.js'

const USAGE = `usage: modelpick-export export --model DIR --images LIST --out DIR
                         [--probs] [--size 224] [--normalization imagenet]
                         [--model-id ID] [--target-id ID] [--batch 16]

Runs every image in LIST (one 'path' or 'path,label' per line) through the
classifier in DIR and writes features.ptns, optionally probs.ptns, and
manifest-fragment.json into the output directory.`

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== 'export') {
    console.error(USAGE)
    return 1
  }
  let values
  try {
    values = parseArgs({
      args: argv.slice(1),
      options: {
        model: { type: 'string' },
        images: { type: 'string' },
        out: { type: 'string' },
        probs: { type: 'boolean', default: false },
        size: { type: 'string', default: '224' },
        normalization: { type: 'string', default: 'imagenet' },
        'model-id': { type: 'string' },
        'target-id': { type: 'string' },
        batch: { type: 'string', default: '16' },
      },
    }).values
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    console.error(USAGE)
    return 1
  }
  if (!values.model || !values.images || !values.out) {
    console.error('error: --model, --images and --out are required')
    console.error(USAGE)
    return 1
  }
  const normalizations = ['imagenet', 'unit', 'signed', 'none']
  if (!normalizations.includes(values.normalization!)) {
    console.error(`error: --normalization must be one of ${normalizations.join(', ')}`)
    return 1
  }
  try {
    const result = await exportFeatures({
      modelSpec: values.model,
      imageList: values.images,
      outputDir: values.out,
      includeProbs: values.probs,
      imageSize: Number(values.size),
      normalization: values.normalization as Normalization,
      modelId: values['model-id'],
      targetId: values['target-id'],
      batchSize: Number(values.batch),
    })
    console.log(
      JSON.stringify({
        features: result.featurePath,
        probs: result.probPath,
        fragment: result.fragmentPath,
        images: result.imageCount,
        feature_dim: result.featureDim,
        num_classes: result.numClasses,
        depth_layers: result.depthLayers,
      }),
    )
    return 0
  } catch (err) {
    if (
      err instanceof ModelLoadError ||
      err instanceof ImageDecodeError ||
      err instanceof ShapeProbeError
    ) {
      console.error(`error: ${err.message}`)
      return 2
    }
    throw err
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop() as string)
if (invokedDirectly) {
  main(process.argv.slice(2)).then(
    code => process.exit(code),
    err => {
      console.error(err)
      process.exit(3)
    },
  )
}
