//! PNG/TIFF reading and writing for rasters and 16-bit label maps.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::imaging::{LabelMap, RasterImage};

const IMAGE_EXTENSIONS: &[&str] = &["png", "tif", "tiff"];

fn decode_error(path: &Path, e: image::ImageError) -> Error {
    Error::Data(format!("cannot read image {}: {e}", path.display()))
}

/// Reads an 8-bit grayscale or RGB image. Alpha is dropped; other layouts are
/// converted to RGB.
pub fn read_image(path: &Path) -> Result<RasterImage> {
    let img = image::open(path).map_err(|e| decode_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => RasterImage::new(h, w, 1, buf.into_raw()),
        other => RasterImage::new(h, w, 3, other.to_rgb8().into_raw()),
    }
}

/// Writes a raster; the format follows the extension (PNG or TIFF).
pub fn write_image(path: &Path, image: &RasterImage) -> Result<()> {
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer(
        path,
        image.samples(),
        image.width() as u32,
        image.height() as u32,
        color,
    )
    .map_err(|e| Error::Data(format!("cannot write image {}: {e}", path.display())))
}

/// Reads a label map stored as 16-bit (or 8-bit) single-channel PNG.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| decode_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        _ => {
            return Err(Error::Data(format!(
                "label map {} is not single-channel",
                path.display()
            )))
        }
    };
    LabelMap::new(h, w, labels)
}

/// Writes a label map as a 16-bit grayscale PNG.
pub fn write_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    let mut raw = Vec::with_capacity(map.labels().len());
    for &l in map.labels() {
        let v = u16::try_from(l).map_err(|_| {
            Error::InvalidInput(format!(
                "label {l} exceeds the 16-bit range of {}",
                path.display()
            ))
        })?;
        raw.push(v);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, raw)
            .ok_or_else(|| Error::invalid("label buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Data(format!("cannot write label map {}: {e}", path.display())))
}

pub fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    list_with(dir, is_image_file)
}

/// PNG files in `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    list_with(dir, |p| {
        p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
    })
}

fn list_with(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if keep(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// File stem used as the image id throughout the pipeline.
pub fn basename(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = RasterImage::new(2, 3, 3, (0..18).map(|v| v * 10).collect()).unwrap();
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn gray_tiff_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tif");
        let img = RasterImage::new(3, 2, 1, vec![0, 50, 100, 150, 200, 250]).unwrap();
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn label_map_keeps_large_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let map = LabelMap::new(2, 2, vec![0, 300, 65535, 1]).unwrap();
        write_label_map(&path, &map).unwrap();
        assert_eq!(read_label_map(&path).unwrap(), map);
        let too_big = LabelMap::new(1, 1, vec![70000]).unwrap();
        assert!(write_label_map(&dir.path().join("x.png"), &too_big).is_err());
    }

    #[test]
    fn unreadable_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        fs::write(&path, b"not a png").unwrap();
        let err = read_image(&path).unwrap_err();
        assert!(err.to_string().contains("broken.png"));
    }

    #[test]
    fn listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.tif", "c.txt"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let names: Vec<_> = list_images(dir.path())
            .unwrap()
            .iter()
            .map(|p| basename(p))
            .collect();
        assert_eq!(names, ["a", "b"]);
    }
}
