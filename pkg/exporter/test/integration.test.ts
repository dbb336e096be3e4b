// Cross-package conformance: everything the exporter writes must pass the
// consumer's own validation, reached only through its public command line.

import { spawnSync } from 'child_process'
import fs from 'fs'
import os from 'os'
import path from 'path'
import { afterAll, beforeAll, describe, expect, test } from 'vitest'
import { exportFeatures } from '../src/export.js'
import { buildResidual18, makeImageCorpus, saveFreshModel } from './helpers.js'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'integration-'))
const modelDir = path.join(tmp, 'model')
const outDir = path.join(tmp, 'export')

function consumerCli(...args: string[]) {
  return spawnSync('modelpick', args, { encoding: 'utf8' })
}

const consumerAvailable = consumerCli('--help').status === 0

beforeAll(async () => {
  await saveFreshModel(buildResidual18, modelDir)
  const corpus = makeImageCorpus(path.join(tmp, 'images'))
  await exportFeatures({
    modelSpec: modelDir,
    imageList: corpus.listPath,
    outputDir: outDir,
    includeProbs: true,
    imageSize: 32,
    modelId: 'res18ish',
    targetId: 't_demo',
  })
}, 120_000)

afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

describe.runIf(consumerAvailable)('consumer-side validation', () => {
  test('exported bank passes `modelpick validate` with zero errors', () => {
    const fragment = JSON.parse(fs.readFileSync(path.join(outDir, 'manifest-fragment.json'), 'utf8'))
    fs.writeFileSync(path.join(outDir, 'labels.json'), JSON.stringify(fragment.images.labels))
    const manifest = {
      models: fragment.models,
      targets: [
        {
          target_id: 't_demo',
          target_dataset_size: fragment.images.count,
          task_kind: 'single_label',
          num_classes: 2,
        },
      ],
      artifacts: fragment.artifacts,
      outcomes: [{ model_id: 'res18ish', target_id: 't_demo', accuracy: 0.5 }],
      labels: { t_demo: 'labels.json' },
    }
    const manifestPath = path.join(outDir, 'manifest.json')
    fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2))
    const result = consumerCli('validate', '--manifest', manifestPath)
    expect(result.stderr.trim()).toBe('')
    expect(result.status).toBe(0)
  })

  test('exported features score through `modelpick score`', () => {
    const result = consumerCli(
      'score',
      '--method', 'parc',
      '--features', path.join(outDir, 'features.ptns'),
      '--labels', path.join(outDir, 'labels.json'),
    )
    expect(result.status).toBe(0)
    const record = JSON.parse(result.stdout)
    expect(record.method).toBe('parc')
    expect(record.raw_score).toBeGreaterThanOrEqual(-1)
    expect(record.raw_score).toBeLessThanOrEqual(1)
  })

  test('exported probabilities score through `modelpick score --method leep`', () => {
    const result = consumerCli(
      'score',
      '--method', 'leep',
      '--probs', path.join(outDir, 'probs.ptns'),
      '--labels', path.join(outDir, 'labels.json'),
    )
    expect(result.status).toBe(0)
    const record = JSON.parse(result.stdout)
    expect(record.raw_score).toBeLessThanOrEqual(0)
  })
})

test('consumer CLI is present in this environment', () => {
  expect(consumerAvailable).toBe(true)
})
