import fs from 'fs'
import path from 'path'
import { PNG } from 'pngjs'
import * as tf from '@tensorflow/tfjs'
import { saveModelToDir } from '../src/modelio.js'

function residualBlock(
  x: tf.SymbolicTensor,
  filters: number,
  stride: number,
  name: string,
): tf.SymbolicTensor {
  let shortcut = x
  if (stride > 1) {
    shortcut = tf.layers
      .averagePooling2d({ poolSize: stride, strides: stride, name: `${name}_pool` })
      .apply(shortcut) as tf.SymbolicTensor
  }
  let y = tf.layers
    .conv2d({ filters, kernelSize: 3, strides: stride, padding: 'same', useBias: false, name: `${name}_conv1` })
    .apply(x) as tf.SymbolicTensor
  y = tf.layers.batchNormalization({ name: `${name}_bn1` }).apply(y) as tf.SymbolicTensor
  y = tf.layers.activation({ activation: 'relu', name: `${name}_relu1` }).apply(y) as tf.SymbolicTensor
  y = tf.layers
    .conv2d({ filters, kernelSize: 3, strides: 1, padding: 'same', useBias: false, name: `${name}_conv2` })
    .apply(y) as tf.SymbolicTensor
  y = tf.layers.batchNormalization({ name: `${name}_bn2` }).apply(y) as tf.SymbolicTensor
  y = tf.layers.add({ name: `${name}_add` }).apply([y, shortcut]) as tf.SymbolicTensor
  return tf.layers.activation({ activation: 'relu', name: `${name}_out` }).apply(y) as tf.SymbolicTensor
}

/**
 * Residual classifier with exactly 18 weighted layers (17 conv + 1 dense)
 * and a 512-wide penultimate feature map, shaped like a slim ResNet-18.
 */
export function buildResidual18(numClasses = 10): tf.LayersModel {
  const input = tf.input({ shape: [null as unknown as number, null as unknown as number, 3] })
  let x = tf.layers
    .conv2d({ filters: 32, kernelSize: 3, strides: 2, padding: 'same', useBias: false, name: 'stem' })
    .apply(input) as tf.SymbolicTensor
  x = tf.layers.batchNormalization({ name: 'stem_bn' }).apply(x) as tf.SymbolicTensor
  x = tf.layers.activation({ activation: 'relu', name: 'stem_relu' }).apply(x) as tf.SymbolicTensor
  const strides = [1, 2, 1, 2, 1, 2, 1]
  strides.forEach((stride, i) => {
    x = residualBlock(x, 32, stride, `block${i}`)
  })
  x = tf.layers
    .conv2d({ filters: 512, kernelSize: 3, padding: 'same', useBias: false, name: 'expand' })
    .apply(x) as tf.SymbolicTensor
  x = tf.layers.activation({ activation: 'relu', name: 'expand_relu' }).apply(x) as tf.SymbolicTensor
  x = tf.layers.conv2d({ filters: 512, kernelSize: 1, name: 'mix' }).apply(x) as tf.SymbolicTensor
  x = tf.layers.globalAveragePooling2d({ name: 'gap' }).apply(x) as tf.SymbolicTensor
  const out = tf.layers
    .dense({ units: numClasses, activation: 'softmax', name: 'classifier' })
    .apply(x) as tf.SymbolicTensor
  return tf.model({ inputs: input, outputs: out, name: 'residual18' })
}

/** small conv net with a wide logits head (no softmax on the layer) */
export function buildWideLogitsNet(numClasses = 1000): tf.LayersModel {
  const input = tf.input({ shape: [null as unknown as number, null as unknown as number, 3] })
  let x = tf.layers
    .conv2d({ filters: 8, kernelSize: 3, strides: 2, padding: 'same', name: 'c1' })
    .apply(input) as tf.SymbolicTensor
  x = tf.layers.activation({ activation: 'relu', name: 'r1' }).apply(x) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({ filters: 16, kernelSize: 3, strides: 2, padding: 'same', name: 'c2' })
    .apply(x) as tf.SymbolicTensor
  x = tf.layers.activation({ activation: 'relu', name: 'r2' }).apply(x) as tf.SymbolicTensor
  x = tf.layers.globalAveragePooling2d({ name: 'gap' }).apply(x) as tf.SymbolicTensor
  const out = tf.layers.dense({ units: numClasses, name: 'logits' }).apply(x) as tf.SymbolicTensor
  return tf.model({ inputs: input, outputs: out, name: 'wide_logits' })
}

export async function saveFreshModel(
  build: () => tf.LayersModel,
  dir: string,
): Promise<void> {
  const model = build()
  await saveModelToDir(model, dir)
  model.dispose()
}

/** deterministic little-noise RGB image */
export function writePng(file: string, width: number, height: number, seed: number): void {
  const png = new PNG({ width, height })
  let state = seed >>> 0
  const next = () => {
    // xorshift32: deterministic pixels without pulling in an RNG dep
    state ^= state << 13
    state ^= state >>> 17
    state ^= state << 5
    state >>>= 0
    return state
  }
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = next() % 256
    png.data[i * 4 + 1] = next() % 256
    png.data[i * 4 + 2] = next() % 256
    png.data[i * 4 + 3] = 255
  }
  fs.mkdirSync(path.dirname(file), { recursive: true })
  fs.writeFileSync(file, PNG.sync.write(png))
}

export function writePpm(file: string, width: number, height: number, value: number): void {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, 'latin1')
  const body = Buffer.alloc(width * height * 3, value)
  fs.mkdirSync(path.dirname(file), { recursive: true })
  fs.writeFileSync(file, Buffer.concat([header, body]))
}

export interface Corpus {
  listPath: string
  dir: string
  labels: number[]
}

/** four labelled images (3 PNG + 1 PPM) and their list file */
export function makeImageCorpus(dir: string): Corpus {
  fs.mkdirSync(dir, { recursive: true })
  writePng(path.join(dir, 'img0.png'), 40, 30, 1)
  writePng(path.join(dir, 'img1.png'), 32, 32, 2)
  writePng(path.join(dir, 'img2.png'), 24, 48, 3)
  writePpm(path.join(dir, 'img3.ppm'), 32, 32, 128)
  const labels = [0, 1, 0, 1]
  const lines = labels.map((label, i) => {
    const name = i === 3 ? 'img3.ppm' : `img${i}.png`
    return `${name},${label}`
  })
  const listPath = path.join(dir, 'images.csv')
  fs.writeFileSync(listPath, lines.join('\n') + '\n')
  return { listPath, dir, labels }
}
