import fs from 'fs'
import { PNG } from 'pngjs'
import * as tf from '@tensorflow/tfjs'
import { ImageDecodeError } from './errors.js'

export interface DecodedImage {
  width: number
  height: number
  /** row-major RGB, values in [0, 255] */
  rgb: Float32Array
}

export type Normalization = 'imagenet' | 'unit' | 'signed' | 'none'

const IMAGENET_MEAN = [0.485, 0.456, 0.406]
const IMAGENET_STD = [0.229, 0.224, 0.225]

function decodePng(file: string, blob: Buffer): DecodedImage {
  let png: PNG
  try {
    png = PNG.sync.read(blob)
  } catch (err) {
    throw new ImageDecodeError(file, `PNG decode failed: ${(err as Error).message}`)
  }
  const { width, height, data } = png
  const rgb = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    rgb[i * 3] = data[i * 4]
    rgb[i * 3 + 1] = data[i * 4 + 1]
    rgb[i * 3 + 2] = data[i * 4 + 2]
  }
  return { width, height, rgb }
}

// binary PPM (P6), maxval 255: dependency-free interchange format
function decodePpm(file: string, blob: Buffer): DecodedImage {
  const header = blob.subarray(0, 64).toString('latin1')
  const match = header.match(/^P6\s+(\d+)\s+(\d+)\s+(\d+)\s/)
  if (!match) {
    throw new ImageDecodeError(file, 'malformed PPM header')
  }
  const [, w, h, maxval] = match
  const width = Number(w)
  const height = Number(h)
  if (Number(maxval) !== 255) {
    throw new ImageDecodeError(file, `unsupported PPM maxval ${maxval}`)
  }
  const offset = match[0].length
  const need = width * height * 3
  if (blob.length < offset + need) {
    throw new ImageDecodeError(file, 'truncated PPM payload')
  }
  const rgb = new Float32Array(need)
  for (let i = 0; i < need; i++) {
    rgb[i] = blob[offset + i]
  }
  return { width, height, rgb }
}

export function decodeImage(file: string): DecodedImage {
  let blob: Buffer
  try {
    blob = fs.readFileSync(file)
  } catch (err) {
    throw new ImageDecodeError(file, (err as Error).message)
  }
  if (blob.length >= 8 && blob.readUInt32BE(0) === 0x89504e47) {
    return decodePng(file, blob)
  }
  if (blob.length >= 2 && blob[0] === 0x50 && blob[1] === 0x36) {
    return decodePpm(file, blob)
  }
  throw new ImageDecodeError(file, 'unrecognized image format (PNG and P6 PPM supported)')
}

/** decode, bilinear-resize to size x size, normalize; returns [size, size, 3] */
export function imageToTensor(
  file: string,
  size: number,
  normalization: Normalization,
): tf.Tensor3D {
  const image = decodeImage(file)
  return tf.tidy(() => {
    let pixels = tf
      .tensor3d(image.rgb, [image.height, image.width, 3])
      .div(255) as tf.Tensor3D
    if (pixels.shape[0] !== size || pixels.shape[1] !== size) {
      pixels = tf.image.resizeBilinear(pixels, [size, size])
    }
    switch (normalization) {
      case 'imagenet':
        return pixels.sub(tf.tensor1d(IMAGENET_MEAN)).div(tf.tensor1d(IMAGENET_STD)) as tf.Tensor3D
      case 'signed':
        return pixels.mul(2).sub(1) as tf.Tensor3D
      case 'none':
        return pixels.mul(255) as tf.Tensor3D
      case 'unit':
        return pixels
    }
  })
}

export interface ImageListEntry {
  path: string
  label: number | null
}

/** one image per line: `path` or `path,label` (comments with #) */
export function readImageList(file: string): ImageListEntry[] {
  const lines = fs.readFileSync(file, 'utf8').split(/\r?\n/)
  const entries: ImageListEntry[] = []
  for (const raw of lines) {
    const line = raw.trim()
    if (!line || line.startsWith('#')) continue
    const comma = line.lastIndexOf(',')
    if (comma === -1) {
      entries.push({ path: line, label: null })
      continue
    }
    const labelText = line.slice(comma + 1).trim()
    const label = Number(labelText)
    if (!Number.isInteger(label) || label < 0) {
      throw new Error(`${file}: bad label ${JSON.stringify(labelText)} in line ${JSON.stringify(line)}`)
    }
    entries.push({ path: line.slice(0, comma).trim(), label })
  }
  if (entries.length === 0) {
    throw new Error(`${file}: image list is empty`)
  }
  return entries
}
