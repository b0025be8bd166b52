//! Nuclei segmentation behind one interface: a built-in classical segmenter
//! and external models reached through file exchange.

mod classical;
mod exchange;

pub use classical::{
    distance_transform, gaussian_blur, histogram, otsu_threshold, segment_classical, watershed_split,
    ClassicalParams,
};
pub use exchange::{run_exchange, stub_backend, ExchangeContract, BACKEND_DIR_ENV};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::{read_label_map, write_image};
use crate::imaging::{relabel_sequential, LabelMap, RasterImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    Classical(ClassicalParams),
    Exchange(ExchangeContract),
}

impl Backend {
    pub fn id(&self) -> &'static str {
        match self {
            Backend::Classical(_) => "classical",
            Backend::Exchange(_) => "exchange",
        }
    }
}

/// A configured segmenter as recorded in run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterDescriptor {
    pub name: String,
    pub version: String,
    pub backend: Backend,
}

impl SegmenterDescriptor {
    pub fn classical(params: ClassicalParams) -> Self {
        Self {
            name: "classical".into(),
            version: crate::VERSION.into(),
            backend: Backend::Classical(params),
        }
    }

    pub fn exchange(name: impl Into<String>, version: impl Into<String>, contract: ExchangeContract) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
            backend: Backend::Exchange(contract),
        }
    }
}

/// Segments one RGB image into sequentially labeled nuclei.
pub fn segment(descriptor: &SegmenterDescriptor, image: &RasterImage) -> Result<LabelMap> {
    if image.channels() != 3 {
        return Err(Error::invalid(format!(
            "segmentation expects an RGB image, got {} channels",
            image.channels()
        )));
    }
    match &descriptor.backend {
        Backend::Classical(params) => segment_classical(image, params),
        Backend::Exchange(contract) => {
            let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            let input = dir.path().join("in");
            std::fs::create_dir(&input).map_err(|e| Error::io(&input, e))?;
            write_image(&input.join("image.png"), image)?;
            let outputs = run_exchange(contract, &input, &dir.path().join("out"))?;
            Ok(relabel_sequential(&read_label_map(&outputs[0])?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::five_discs;

    #[test]
    fn segment_dispatches_to_classical() {
        let (img, _) = five_discs();
        let d = SegmenterDescriptor::classical(ClassicalParams::default());
        let labels = segment(&d, &img).unwrap();
        assert_eq!((labels.height(), labels.width()), (img.height(), img.width()));
        assert_eq!(labels.instance_count(), 5);
    }

    #[test]
    fn segment_rejects_gray() {
        let img = RasterImage::filled(4, 4, 1, 0).unwrap();
        let d = SegmenterDescriptor::classical(ClassicalParams::default());
        assert!(matches!(segment(&d, &img), Err(Error::InvalidInput(_))));
    }

    #[cfg(unix)]
    #[test]
    fn segment_through_exchange() {
        let dir = tempfile::tempdir().unwrap();
        let tpl = dir.path().join("t.png");
        crate::imaging::io::write_label_map(&tpl, &LabelMap::new(2, 2, vec![0, 7, 7, 3]).unwrap()).unwrap();
        let contract = ExchangeContract::new(format!("cp {} {{output}}/image.png", tpl.display()), 30);
        let d = SegmenterDescriptor::exchange("copy", "1", contract);
        let labels = segment(&d, &RasterImage::filled_rgb(2, 2, [1, 2, 3])).unwrap();
        assert_eq!(labels.labels(), &[0, 2, 2, 1]);
    }

    #[test]
    fn descriptor_serializes_with_backend_kind() {
        let d = SegmenterDescriptor::classical(ClassicalParams::default());
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["backend"]["kind"], "classical");
        assert_eq!(d.backend.id(), "classical");
    }
}
