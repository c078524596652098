//! Complex sample matrices as RGB images.
//!
//! Each entry `z` of a sample matrix with batch number `m` becomes one pixel
//! in HSV space: hue `= clamp(|z|/m, 0, 1) * 240°`, saturation
//! `= (arg z + π) / 2π` with `arg 0 = 0`, value `= 1`. Hue stops at blue so
//! `|z| = 0` and `|z| = m` never share a colour.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::binio::{read_file, write_file, ByteReader};
use crate::correlators::SampleMatrix;
use crate::quantum::C64;
use crate::{Error, Result};

/// Upper end of the hue range in degrees.
pub const HUE_SPAN_DEGREES: f64 = 240.0;
/// Version tag of the colour map, recorded in dataset metadata.
pub const ENCODING_VERSION: &str = "hsv-240-v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbPixel {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

/// Standard HSV to RGB; `hue` in degrees, `saturation`/`value` in [0, 1].
/// Channels are rounded to the nearest integer.
pub fn hsv_to_rgb(hue: f64, saturation: f64, value: f64) -> RgbPixel {
    let chroma = value * saturation;
    let sector = (hue.rem_euclid(360.0)) / 60.0;
    let x = chroma * (1.0 - (sector % 2.0 - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let offset = value - chroma;
    let channel = |c: f64| ((c + offset) * 255.0).round().clamp(0.0, 255.0) as u8;
    RgbPixel::new(channel(r), channel(g), channel(b))
}

/// Hue, saturation and value for one complex entry.
pub fn complex_to_hsv(z: C64, m: usize) -> (f64, f64, f64) {
    let scale = m.max(1) as f64;
    let magnitude = z.norm();
    let fraction = if magnitude.is_finite() { (magnitude / scale).clamp(0.0, 1.0) } else { 1.0 };
    let arg = if z == C64::new(0.0, 0.0) || z.is_nan() { 0.0 } else { z.im.atan2(z.re) };
    let saturation = (arg + std::f64::consts::PI) / std::f64::consts::TAU;
    (fraction * HUE_SPAN_DEGREES, saturation, 1.0)
}

pub fn encode_complex(z: C64, m: usize) -> RgbPixel {
    let (h, s, v) = complex_to_hsv(z, m);
    hsv_to_rgb(h, s, v)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledImage {
    pub height: usize,
    pub width: usize,
    /// Row-major pixels.
    pub pixels: Vec<RgbPixel>,
    pub label: u8,
}

impl LabeledImage {
    pub fn new(height: usize, width: usize, pixels: Vec<RgbPixel>, label: u8) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if label > 1 {
            return Err(Error::Argument(format!("label {label} is not a class index in {{0, 1}}")));
        }
        Ok(Self { height, width, pixels, label })
    }

    pub fn pixel(&self, row: usize, col: usize) -> RgbPixel {
        self.pixels[row * self.width + col]
    }

    /// Interleaved `RGB` bytes, row-major.
    pub fn rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| [p.r, p.g, p.b]).collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        let mut encoder = png::Encoder::new(&mut bytes, self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut writer = encoder.write_header().map_err(to_io)?;
        writer.write_image_data(&self.rgb_bytes()).map_err(to_io)?;
        writer.finish().map_err(to_io)?;
        write_file(path, &bytes)
    }
}

/// Pixel `(i, j)` is the encoding of entry `(i, j)` normalised by `batch_m`.
pub fn encode_sample_matrix(s: &SampleMatrix, label: u8) -> Result<LabeledImage> {
    encode_entries(s.n_qubits, &s.entries, s.batch_m, label)
}

pub fn encode_entries(n: usize, entries: &[C64], batch_m: usize, label: u8) -> Result<LabeledImage> {
    if entries.len() != n * n {
        return Err(Error::Shape(format!("{} entries for an {n}x{n} sample", entries.len())));
    }
    let pixels = entries.iter().map(|&z| encode_complex(z, batch_m)).collect();
    LabeledImage::new(n, n, pixels, label)
}

/// Dataset provenance. Stored in a `key = value` sidecar next to the image
/// file since the binary layout has no room for it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetMetadata {
    pub correlator: String,
    /// Ensemble name for class 0 and class 1.
    pub class_names: [String; 2],
    pub n_qubits: usize,
    pub batch_m: usize,
    pub seed: u64,
}

impl DatasetMetadata {
    fn to_text(&self) -> String {
        format!(
            "correlator = {}\nclass0 = {}\nclass1 = {}\nn_qubits = {}\nbatch_m = {}\nseed = {}\nencoding = {ENCODING_VERSION}\n",
            self.correlator, self.class_names[0], self.class_names[1], self.n_qubits, self.batch_m, self.seed
        )
    }

    fn from_text(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter_map(|line| line.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |key: &str| map.get(key).copied().unwrap_or_default().to_string();
        let num = |key: &str| {
            get(key)
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad or missing {key} in dataset metadata")))
        };
        Ok(Self {
            correlator: get("correlator"),
            class_names: [get("class0"), get("class1")],
            n_qubits: num("n_qubits")? as usize,
            batch_m: num("batch_m")? as usize,
            seed: num("seed")?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub images: Vec<LabeledImage>,
    pub metadata: DatasetMetadata,
}

const IMAGE_MAGIC: &[u8; 4] = b"QCIM";
const IMAGE_VERSION: u16 = 1;

impl Dataset {
    pub fn new(images: Vec<LabeledImage>, metadata: DatasetMetadata) -> Result<Self> {
        let ds = Self { images, metadata };
        ds.check_uniform()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(height, width)` shared by every image.
    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(|im| (im.height, im.width))
    }

    fn check_uniform(&self) -> Result<()> {
        if let Some((h, w)) = self.image_dims() {
            if let Some(bad) = self.images.iter().position(|im| (im.height, im.width) != (h, w)) {
                return Err(Error::Shape(format!("image {bad} differs from the first image's {h}x{w}")));
            }
        }
        Ok(())
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for im in &self.images {
            counts[im.label as usize] += 1;
        }
        counts
    }

    /// Classification datasets need both labels present.
    pub fn require_both_classes(&self) -> Result<()> {
        let counts = self.class_counts();
        if counts.contains(&0) {
            return Err(Error::Validation(format!(
                "dataset needs both classes, has {} of class 0 and {} of class 1",
                counts[0], counts[1]
            )));
        }
        Ok(())
    }

    /// `QCIM` layout (little-endian): `"QCIM"`, version `u16 = 1`, height
    /// `u8`, width `u8`, channels `u8 = 3`, count `u32`, then per image a
    /// `u8` label and `height * width * 3` RGB bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (h, w) = self.image_dims().unwrap_or((0, 0));
        let (h8, w8) = (u8::try_from(h), u8::try_from(w));
        let (Ok(h8), Ok(w8)) = (h8, w8) else {
            return Err(Error::Argument(format!("{h}x{w} images do not fit the QCIM header")));
        };
        let mut out = Vec::with_capacity(13 + self.len() * (1 + h * w * 3));
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&[h8, w8, 3]);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for im in &self.images {
            out.push(im.label);
            out.extend(im.rgb_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], metadata: DatasetMetadata) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(IMAGE_MAGIC)?;
        let version = r.u16("version")?;
        if version != IMAGE_VERSION {
            return Err(Error::Format { offset: 4, reason: format!("unsupported version {version}") });
        }
        let height = r.u8("height")? as usize;
        let width = r.u8("width")? as usize;
        let channels = r.u8("channels")?;
        if channels != 3 {
            return Err(Error::Format { offset: 8, reason: format!("expected 3 channels, found {channels}") });
        }
        let count = r.u32("count")?;
        let mut images = Vec::with_capacity((count as usize).min(r.remaining()));
        for index in 0..count {
            let label_offset = r.offset();
            let label = r.u8(&format!("label of image {index}"))?;
            if label > 1 {
                return Err(Error::Format { offset: label_offset, reason: format!("label {label} not in {{0, 1}}") });
            }
            let raw = r.take(height * width * 3, &format!("pixels of image {index}"))?;
            let pixels = raw.chunks_exact(3).map(|c| RgbPixel::new(c[0], c[1], c[2])).collect();
            images.push(LabeledImage { height, width, pixels, label });
        }
        r.finish()?;
        Ok(Self { images, metadata })
    }

    pub fn metadata_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".meta");
        PathBuf::from(name)
    }

    /// Writes the image file and its metadata sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes()?)?;
        write_file(&Self::metadata_path(path), self.metadata.to_text().as_bytes())
    }

    /// Reads the image file; metadata comes from the sidecar when present.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let meta_path = Self::metadata_path(path);
        let metadata = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            DatasetMetadata::from_text(&text)?
        } else {
            DatasetMetadata::default()
        };
        Self::from_bytes(&bytes, metadata)
    }

    /// One PNG per image, named `<class>_<index>.png`.
    pub fn export_png(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.images
            .iter()
            .enumerate()
            .map(|(index, im)| {
                let path = dir.join(format!("{}_{index}.png", im.label));
                im.write_png(&path).map(|_| path)
            })
            .collect()
    }
}

/// Uniform split without replacement: `train_count` images for training,
/// the rest for validation.
pub fn split_dataset<R: Rng + ?Sized>(d: &Dataset, train_count: usize, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if train_count == 0 || train_count >= d.len() {
        return Err(Error::Argument(format!(
            "train_count {train_count} must lie strictly between 0 and {}",
            d.len()
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(rng);
    let pick = |idx: &[usize]| Dataset {
        images: idx.iter().map(|&i| d.images[i].clone()).collect(),
        metadata: d.metadata.clone(),
    };
    Ok((pick(&order[..train_count]), pick(&order[train_count..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{catalog, sample_matrix, PairSharing};
    use crate::ensembles::EnsembleSpec;
    use crate::seed::rng_from;
    use std::collections::HashSet;

    /// Sector/fraction formulation of HSV→RGB (the `colorsys` algorithm),
    /// kept separate from the chroma formulation above.
    fn reference_hsv(h_deg: f64, s: f64, v: f64) -> (u8, u8, u8) {
        let to_byte = |x: f64| (x * 255.0).round() as u8;
        if s == 0.0 {
            return (to_byte(v), to_byte(v), to_byte(v));
        }
        let h = (h_deg / 360.0).rem_euclid(1.0);
        let i = (h * 6.0).floor();
        let f = h * 6.0 - i;
        let p = v * (1.0 - s);
        let q = v * (1.0 - s * f);
        let t = v * (1.0 - s * (1.0 - f));
        let (r, g, b) = match i as u32 % 6 {
            0 => (v, t, p),
            1 => (q, v, p),
            2 => (p, v, t),
            3 => (p, q, v),
            4 => (t, p, v),
            _ => (v, p, q),
        };
        (to_byte(r), to_byte(g), to_byte(b))
    }

    #[test]
    fn named_encodings() {
        assert_eq!(encode_complex(C64::new(0.0, 0.0), 5), RgbPixel::new(255, 128, 128));
        assert_eq!(encode_complex(C64::new(5.0, 0.0), 5), RgbPixel::new(128, 128, 255));
        // arg = −π only from a negative real with a −0 imaginary part: S = 0.
        assert_eq!(encode_complex(C64::new(-2.0, -0.0), 5), RgbPixel::new(255, 255, 255));
    }

    #[test]
    fn matches_reference_conversion() {
        let mut rng = rng_from(1);
        for _ in 0..5000 {
            let h = rng.random_range(0.0..360.0);
            let s = rng.random_range(0.0..1.0);
            let v = rng.random_range(0.0..1.0);
            let got = hsv_to_rgb(h, s, v);
            let (r, g, b) = reference_hsv(h, s, v);
            for (x, y) in [(got.r, r), (got.g, g), (got.b, b)] {
                assert!((x as i32 - y as i32).abs() <= 1, "h={h} s={s} v={v}: {got:?} vs {:?}", (r, g, b));
            }
        }
    }

    #[test]
    fn clamps_and_is_total() {
        let big = encode_complex(C64::new(100.0, 0.0), 5);
        assert_eq!(big, encode_complex(C64::new(5.0, 0.0), 5));
        let _ = encode_complex(C64::new(f64::MAX, f64::MAX), 1);
        let _ = encode_complex(C64::new(-1e-300, 1e-300), 1);
    }

    #[test]
    fn hue_monotone_in_magnitude() {
        for k in 0..16 {
            let theta = -3.1 + 0.4 * k as f64;
            let mut last = -1.0;
            for step in 0..=100 {
                let z = C64::from_polar(5.0 * step as f64 / 100.0, theta);
                let (h, _, _) = complex_to_hsv(z, 5);
                assert!(h >= last);
                last = h;
            }
        }
    }

    #[test]
    fn pauli_xyxy_image_has_two_colours() {
        let ens = EnsembleSpec::pauli(10).unwrap();
        let s = sample_matrix(&catalog("xyxy").unwrap(), &ens, 5, 3, PairSharing::Shared).unwrap();
        let image = encode_sample_matrix(&s, 0).unwrap();
        assert_eq!((image.height, image.width), (10, 10));
        let colours: HashSet<_> = image.pixels.iter().copied().collect();
        assert_eq!(colours.len(), 2);
        assert_ne!(image.pixel(0, 0), image.pixel(0, 1));
    }

    #[test]
    fn zero_matrix_is_uniform() {
        let image = encode_entries(4, &[C64::new(0.0, 0.0); 16], 5, 1).unwrap();
        assert!(image.pixels.iter().all(|&p| p == image.pixels[0]));
        assert!(encode_entries(4, &[C64::new(0.0, 0.0); 15], 5, 1).is_err());
        assert!(LabeledImage::new(1, 1, vec![RgbPixel::default()], 2).is_err());
    }

    fn toy_dataset(count: usize) -> Dataset {
        let images = (0..count)
            .map(|k| {
                let px = RgbPixel::new(k as u8, (k * 7) as u8, 3);
                LabeledImage::new(2, 3, vec![px; 6], (k % 2) as u8).unwrap()
            })
            .collect();
        let metadata = DatasetMetadata {
            correlator: "xxyy".into(),
            class_names: ["pauli1".into(), "haar".into()],
            n_qubits: 3,
            batch_m: 5,
            seed: 11,
        };
        Dataset::new(images, metadata).unwrap()
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.qcim");
        let ds = toy_dataset(9);
        ds.write(&path).unwrap();
        let back = Dataset::read(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(fs::read(&path).unwrap(), ds.to_bytes().unwrap());

        let bytes = ds.to_bytes().unwrap();
        assert!(matches!(
            Dataset::from_bytes(&bytes[..20], DatasetMetadata::default()),
            Err(Error::Format { offset: 14, .. })
        ));
        let pngs = ds.export_png(&dir.path().join("png")).unwrap();
        assert_eq!(pngs.len(), 9);
        assert!(pngs[4].ends_with("0_4.png"));
    }

    #[test]
    fn split_examples() {
        let ds = toy_dataset(6250);
        let mut rng = rng_from(5);
        let (train, val) = split_dataset(&ds, 5000, &mut rng).unwrap();
        assert_eq!((train.len(), val.len()), (5000, 1250));
        assert_eq!(train.metadata, ds.metadata);

        let (_, val) = split_dataset(&ds, 6249, &mut rng).unwrap();
        assert_eq!(val.len(), 1);

        let (a, _) = split_dataset(&ds, 100, &mut rng_from(9)).unwrap();
        let (b, _) = split_dataset(&ds, 100, &mut rng_from(9)).unwrap();
        assert_eq!(a, b);

        assert!(split_dataset(&ds, 0, &mut rng).is_err());
        assert!(split_dataset(&ds, 6250, &mut rng).is_err());
    }

    #[test]
    fn class_checks() {
        let ds = toy_dataset(4);
        assert_eq!(ds.class_counts(), [2, 2]);
        ds.require_both_classes().unwrap();
        let single = Dataset { images: ds.images.iter().filter(|im| im.label == 0).cloned().collect(), ..ds.clone() };
        assert!(matches!(single.require_both_classes(), Err(Error::Validation(_))));
    }
}
