use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("buffer holds {got} bytes, expected {expected} for {width}x{height}x{channels}")]
    BufferSize { got: usize, expected: usize, width: u32, height: u32, channels: u8 },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(u8),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
}

/// Row-major 8-bit image with a capture timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
    pub timestamp: f64,
    /// File the frame was read from, when it came from disk.
    pub source: Option<PathBuf>,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>, timestamp: f64) -> Result<Self, FrameError> {
        if channels != 1 && channels != 3 {
            return Err(FrameError::Channels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(FrameError::BufferSize { got: data.len(), expected, width, height, channels });
        }
        Ok(Self { width, height, channels, data, timestamp, source: None })
    }

    /// Uniform frame of one colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3], timestamp: f64) -> Self {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, channels: 3, data, timestamp, source: None }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn put_rgb(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        if c == 3 {
            self.data[i..i + 3].copy_from_slice(&rgb);
        } else {
            self.data[i] = luma(rgb[0] as f32, rgb[1] as f32, rgb[2] as f32).round() as u8;
        }
    }

    /// Luma plane as floats.
    pub fn gray(&self) -> Vec<f32> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f32).collect(),
            _ => self.data.chunks_exact(3).map(|p| luma(p[0] as f32, p[1] as f32, p[2] as f32)).collect(),
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>, FrameError> {
        let mut out = Cursor::new(Vec::new());
        match self.channels {
            1 => ImageBuffer::<Luma<u8>, _>::from_raw(self.width, self.height, self.data.as_slice())
                .expect("buffer size checked")
                .write_to(&mut out, ImageFormat::Png)?,
            _ => ImageBuffer::<Rgb<u8>, _>::from_raw(self.width, self.height, self.data.as_slice())
                .expect("buffer size checked")
                .write_to(&mut out, ImageFormat::Png)?,
        }
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8], timestamp: f64) -> Result<Self, FrameError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
        let (width, height, channels, data) = match img {
            image::DynamicImage::ImageLuma8(g) => (g.width(), g.height(), 1, g.into_raw()),
            other => {
                let rgb = other.into_rgb8();
                (rgb.width(), rgb.height(), 3, rgb.into_raw())
            }
        };
        Frame::new(width, height, channels, data, timestamp)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), FrameError> {
        std::fs::write(path, self.to_png()?).map_err(|e| FrameError::Codec(e.into()))
    }

    pub fn load_png(path: &Path, timestamp: f64) -> Result<Self, FrameError> {
        let bytes = std::fs::read(path).map_err(|e| FrameError::Codec(e.into()))?;
        let mut frame = Frame::from_png(&bytes, timestamp)?;
        frame.source = Some(path.to_path_buf());
        Ok(frame)
    }
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(Frame::new(4, 4, 3, vec![0; 47], 0.0), Err(FrameError::BufferSize { .. })));
        assert!(matches!(Frame::new(4, 4, 2, vec![0; 32], 0.0), Err(FrameError::Channels(2))));
        assert!(Frame::new(4, 4, 1, vec![0; 16], 0.0).is_ok());
    }

    #[test]
    fn png_round_trip() {
        let mut f = Frame::filled(7, 5, [10, 200, 30], 1.5);
        f.put_rgb(3, 2, [255, 0, 128]);
        let back = Frame::from_png(&f.to_png().unwrap(), 1.5).unwrap();
        assert_eq!(back, f);

        let g = Frame::new(3, 2, 1, vec![0, 50, 100, 150, 200, 250], 0.0).unwrap();
        assert_eq!(Frame::from_png(&g.to_png().unwrap(), 0.0).unwrap(), g);
    }

    #[test]
    fn gray_of_white_is_255() {
        let f = Frame::filled(2, 2, [255, 255, 255], 0.0);
        assert!(f.gray().iter().all(|&v| (v - 255.0).abs() < 1e-3));
    }
}
