//! PNG decode/encode between disk files and the core RGB8 buffer.

use std::io::Cursor;
use std::path::Path;

use comclip_core::image::ImageBuf;
use image::ImageReader;

#[derive(Debug, thiserror::Error)]
pub enum ImgIoError {
    #[error("failed to read image {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to encode image: {0}")]
    Encode(image::ImageError),
    #[error("bad image geometry: {0}")]
    Geometry(#[from] comclip_core::image::ImageError),
}

/// Decode any supported image file into an RGB8 buffer.
pub fn load_image(path: &Path) -> Result<ImageBuf, ImgIoError> {
    let name = path.display().to_string();
    let reader = ImageReader::open(path).map_err(|source| ImgIoError::Io {
        path: name.clone(),
        source,
    })?;
    let img = reader
        .decode()
        .map_err(|source| ImgIoError::Decode { path: name, source })?
        .into_rgb8();
    Ok(ImageBuf::new(img.width(), img.height(), img.into_raw())?)
}

/// Encode a buffer as PNG bytes.
pub fn png_bytes(img: &ImageBuf) -> Result<Vec<u8>, ImgIoError> {
    let rgb = image::RgbImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .expect("buffer length matches dimensions by construction");
    let mut out = Cursor::new(Vec::new());
    rgb.write_to(&mut out, image::ImageFormat::Png)
        .map_err(ImgIoError::Encode)?;
    Ok(out.into_inner())
}

/// Write a buffer to disk as PNG.
pub fn save_png(img: &ImageBuf, path: &Path) -> Result<(), ImgIoError> {
    let bytes = png_bytes(img)?;
    std::fs::write(path, bytes).map_err(|source| ImgIoError::Io {
        path: path.display().to_string(),
        source,
    })
}
