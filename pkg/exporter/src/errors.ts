export class ModelLoadError extends Error {
  constructor(message: string) {
    super(message)
    this.name = 'ModelLoadError'
  }
}

export class ImageDecodeError extends Error {
  /** path of the file that failed to decode */
  file: string
  constructor(file: string, reason: string) {
    super(`${file}: ${reason}`)
    this.name = 'ImageDecodeError'
    this.file = file
  }
}

export class ShapeProbeError extends Error {
  constructor(message: string) {
    super(message)
    this.name = 'ShapeProbeError'
  }
}

export class TensorFormatError extends Error {
  /** byte offset at which the problem was detected */
  offset: number
  constructor(message: string, offset: number) {
    super(`${message} (byte offset ${offset})`)
    this.name = 'TensorFormatError'
    this.offset = offset
  }
}
