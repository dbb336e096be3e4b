import fs from 'fs'
import path from 'path'
import { TensorFormatError } from './errors.js'

// PTNS v1 tensor container:
//   bytes 0-3  magic "PTNS"
//   bytes 4-5  version u16 LE (= 1)
//   byte  6    dtype u8: 1 = f32 LE, 2 = f64 LE
//   byte  7    rank u8 (>= 1)
//   then       rank x u64 LE dims, then row-major payload

const MAGIC = Buffer.from('PTNS', 'ascii')
const VERSION = 1

export type PtnsDtype = 'f32' | 'f64'

export interface PtnsTensor {
  dtype: PtnsDtype
  shape: number[]
  data: Float32Array | Float64Array
}

function itemSize(dtype: PtnsDtype): number {
  return dtype === 'f32' ? 4 : 8
}

export function encodeTensor(tensor: PtnsTensor): Buffer {
  const { dtype, shape, data } = tensor
  if (shape.length < 1) {
    throw new TensorFormatError('rank must be at least 1', 7)
  }
  let count = 1
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new TensorFormatError('dimensions must be positive integers', 8)
    }
    count *= dim
  }
  if (count !== data.length) {
    throw new TensorFormatError(
      `shape ${JSON.stringify(shape)} needs ${count} scalars, payload has ${data.length}`,
      8,
    )
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new TensorFormatError(
        'payload scalar is not finite',
        8 + 8 * shape.length + i * itemSize(dtype),
      )
    }
  }
  const header = Buffer.alloc(8 + 8 * shape.length)
  MAGIC.copy(header, 0)
  header.writeUInt16LE(VERSION, 4)
  header.writeUInt8(dtype === 'f32' ? 1 : 2, 6)
  header.writeUInt8(shape.length, 7)
  shape.forEach((dim, axis) => header.writeBigUInt64LE(BigInt(dim), 8 + 8 * axis))
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength)
  return Buffer.concat([header, payload])
}

export function decodeTensor(blob: Buffer): PtnsTensor {
  if (blob.length < 4) {
    throw new TensorFormatError('file ends inside the magic bytes', blob.length)
  }
  if (!blob.subarray(0, 4).equals(MAGIC)) {
    throw new TensorFormatError("expected magic bytes 'PTNS'", 0)
  }
  if (blob.length < 8) {
    throw new TensorFormatError('file ends inside the fixed header', blob.length)
  }
  const version = blob.readUInt16LE(4)
  if (version !== VERSION) {
    throw new TensorFormatError(`unsupported container version ${version}`, 4)
  }
  const code = blob.readUInt8(6)
  if (code !== 1 && code !== 2) {
    throw new TensorFormatError(`unknown dtype code ${code}`, 6)
  }
  const dtype: PtnsDtype = code === 1 ? 'f32' : 'f64'
  const rank = blob.readUInt8(7)
  if (rank === 0) {
    throw new TensorFormatError('rank must be at least 1', 7)
  }
  const dimsEnd = 8 + 8 * rank
  if (blob.length < dimsEnd) {
    throw new TensorFormatError('file ends inside the dimension list', blob.length)
  }
  const shape: number[] = []
  let count = 1
  for (let axis = 0; axis < rank; axis++) {
    const dim = Number(blob.readBigUInt64LE(8 + 8 * axis))
    if (dim === 0) {
      throw new TensorFormatError(`dimension ${axis} is zero`, 8 + 8 * axis)
    }
    shape.push(dim)
    count *= dim
  }
  const expectedEnd = dimsEnd + count * itemSize(dtype)
  if (blob.length < expectedEnd) {
    throw new TensorFormatError(
      `payload holds ${Math.floor((blob.length - dimsEnd) / itemSize(dtype))} of ${count} scalars`,
      blob.length,
    )
  }
  if (blob.length > expectedEnd) {
    throw new TensorFormatError(`${blob.length - expectedEnd} trailing bytes`, expectedEnd)
  }
  const payload = blob.subarray(dimsEnd, expectedEnd)
  const aligned = Buffer.alloc(payload.length)
  payload.copy(aligned)
  const data =
    dtype === 'f32'
      ? new Float32Array(aligned.buffer, 0, count)
      : new Float64Array(aligned.buffer, 0, count)
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new TensorFormatError('payload scalar is not finite', dimsEnd + i * itemSize(dtype))
    }
  }
  return { dtype, shape, data }
}

/** write via a temp file + rename so partial files are never observed */
export function writeTensorFile(tensor: PtnsTensor, file: string): void {
  const blob = encodeTensor(tensor)
  const tmp = file + '.tmp'
  fs.mkdirSync(path.dirname(file), { recursive: true })
  fs.writeFileSync(tmp, blob)
  fs.renameSync(tmp, file)
}

export function readTensorFile(file: string): PtnsTensor {
  return decodeTensor(fs.readFileSync(file))
}
