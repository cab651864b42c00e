//! 8-bit PNG encoding of [`ImageBuffer`]s.
//!
//! Quantization is round-half-up: `q = floor(255·v + 0.5)`, decoded as `q / 255`.

use std::io::Cursor;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::generator::ImageBuffer;

pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn to_rgb8(img: &ImageBuffer) -> RgbImage {
    let bytes = img.data().iter().map(|&v| quantize(v)).collect();
    RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions")
}

pub fn from_rgb8(img: &RgbImage) -> ImageBuffer {
    let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
    ImageBuffer::new(img.height() as usize, img.width() as usize, data)
        .expect("8-bit values are in range")
}

/// The image as it will look after a PNG round trip.
pub fn quantized(img: &ImageBuffer) -> ImageBuffer {
    from_rgb8(&to_rgb8(img))
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_rgb8(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(from_rgb8(&img.to_rgb8()))
}

pub fn encode_png_base64(img: &ImageBuffer) -> Result<String> {
    Ok(STANDARD.encode(encode_png(img)?))
}

pub fn decode_png_base64(text: &str) -> Result<ImageBuffer> {
    let bytes = STANDARD
        .decode(text.trim())
        .map_err(|e| Error::Codec(format!("invalid base64: {e}")))?;
    decode_png(&bytes)
}

pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn load_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    decode_png(&std::fs::read(path)?)
}

/// Places images side by side (all must share a height).
pub fn hstack(images: &[ImageBuffer]) -> Result<ImageBuffer> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
    let h = first.height();
    let w: usize = images.iter().map(ImageBuffer::width).sum();
    let mut data = vec![0.0; h * w * 3];
    let mut x0 = 0;
    for img in images {
        if img.height() != h {
            return Err(Error::dims("strip image height", h, img.height()));
        }
        for y in 0..h {
            let src = &img.data()[y * img.width() * 3..(y + 1) * img.width() * 3];
            let at = (y * w + x0) * 3;
            data[at..at + src.len()].copy_from_slice(src);
        }
        x0 += img.width();
    }
    ImageBuffer::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 rounds up
        assert_eq!(quantize(127.4 / 255.0), 127);
    }

    #[test]
    fn png_round_trip_is_exact_after_quantization() {
        let data: Vec<f64> = (0..4 * 5 * 3).map(|i| (i as f64 * 0.013) % 1.0).collect();
        let img = ImageBuffer::new(4, 5, data).unwrap();
        let q = quantized(&img);
        let back = decode_png_base64(&encode_png_base64(&img).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(img.max_abs_diff(&q) <= 0.5 / 255.0 + 1e-12);
        assert_eq!(quantized(&q), q);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(decode_png_base64("not base64!").is_err());
        assert!(decode_png(b"definitely not a png").is_err());
    }

    #[test]
    fn hstack_concatenates_widths() {
        let a = ImageBuffer::filled(2, 1, 0.0);
        let b = ImageBuffer::filled(2, 3, 1.0);
        let s = hstack(&[a, b]).unwrap();
        assert_eq!(s.dims(), (2, 4));
        assert_eq!(s.pixel(1, 0), [0.0; 3]);
        assert_eq!(s.pixel(1, 3), [1.0; 3]);
    }
}
