//! Randomized file-format instances and byte-level corruptions.

use fert_core::io::*;
use fert_core::radar::AdcCube;
use fert_core::sim::Recording;
use fert_core::{ClassLabel, Error};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::seeded;

fn label(rng: &mut ChaCha8Rng) -> Option<ClassLabel> {
    ClassLabel::from_index(rng.random_range(0..5))
}

fn values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1e3f32..1e3)).collect()
}

pub fn random_recording(rng: &mut ChaCha8Rng) -> Recording {
    let (n_rx, n_chirps, n_samples) = (rng.random_range(1..4), rng.random_range(1..9), rng.random_range(1..17));
    let frames = (0..rng.random_range(0..5))
        .map(|k| AdcCube {
            n_rx,
            n_chirps,
            n_samples,
            frame_index: k,
            data: values(n_rx * n_chirps * n_samples, rng),
        })
        .collect();
    Recording {
        label: label(rng),
        seed: rng.random(),
        frames,
    }
}

pub fn random_features(rng: &mut ChaCha8Rng) -> FeatureFile {
    let (rows, cols) = (rng.random_range(1..9), rng.random_range(1..9));
    let windows = (0..rng.random_range(0..4))
        .map(|_| std::array::from_fn(|_| values(rows * cols, rng)))
        .collect();
    FeatureFile {
        label: label(rng),
        rows,
        cols,
        windows,
    }
}

pub fn random_model(rng: &mut ChaCha8Rng) -> Vec<NamedTensor> {
    (0..rng.random_range(0..6))
        .map(|i| {
            let dims: Vec<u32> = (0..rng.random_range(0..5)).map(|_| rng.random_range(1..5)).collect();
            let n = dims.iter().product::<u32>() as usize;
            NamedTensor {
                name: format!("t{i}.{}", "w".repeat(rng.random_range(0..20))),
                dims,
                data: values(n, rng),
            }
        })
        .collect()
}

/// Seeds in `seeds` whose instance fails write -> read -> write byte identity,
/// per format.
pub fn round_trip_failures(seeds: std::ops::Range<u64>) -> [Vec<u64>; 3] {
    let mut bad: [Vec<u64>; 3] = Default::default();
    for seed in seeds {
        let mut rng = seeded(seed);
        let rec = random_recording(&mut rng);
        let bytes = encode_recording(&rec).unwrap();
        let back = decode_recording(&bytes).unwrap();
        if back != rec || encode_recording(&back).unwrap() != bytes {
            bad[0].push(seed);
        }
        let feat = random_features(&mut rng);
        let bytes = encode_features(&feat).unwrap();
        let back = decode_features(&bytes).unwrap();
        if back != feat || encode_features(&back).unwrap() != bytes {
            bad[1].push(seed);
        }
        let model = random_model(&mut rng);
        let bytes = encode_model(&model).unwrap();
        let back = decode_model(&bytes).unwrap();
        if back != model || encode_model(&back).unwrap() != bytes {
            bad[2].push(seed);
        }
    }
    bad
}

pub struct Corruption {
    pub format: &'static str,
    pub name: &'static str,
    pub bytes: Vec<u8>,
    pub exit_code: i32,
}

fn put(bytes: &mut [u8], at: usize, v: &[u8]) {
    bytes[at..at + v.len()].copy_from_slice(v);
}

/// Every corruption class for every format, applied to a valid instance,
/// with the exit code it must map to.
pub fn corruptions() -> Vec<Corruption> {
    let mut rng = seeded(99);
    let mut rec = random_recording(&mut rng);
    while rec.frames.is_empty() {
        rec = random_recording(&mut rng);
    }
    let mut feat = random_features(&mut rng);
    while feat.windows.is_empty() {
        feat = random_features(&mut rng);
    }
    let model = vec![NamedTensor {
        name: "w".into(),
        dims: vec![2, 3],
        data: values(6, &mut rng),
    }];
    let valid = [
        ("FERD", encode_recording(&rec).unwrap()),
        ("FERF", encode_features(&feat).unwrap()),
        ("FERM", encode_model(&model).unwrap()),
    ];

    let mut out = Vec::new();
    for (format, good) in valid {
        let mut case = |name, f: &dyn Fn(&mut Vec<u8>), exit_code| {
            let mut bytes = good.clone();
            f(&mut bytes);
            out.push(Corruption {
                format,
                name,
                bytes,
                exit_code,
            });
        };
        case("bad magic", &|b| b[0] ^= 0xFF, 3);
        case("unsupported version", &|b| put(b, 4, &7u16.to_le_bytes()), 3);
        case("truncated header", &|b| b.truncate(7), 4);
        case("truncated payload", &|b| {
            b.pop();
        }, 4);
        case("trailing bytes", &|b| b.extend_from_slice(&[0, 1, 2]), 3);
        match format {
            "FERD" => {
                case("invalid label", &|b| put(b, 6, &9u16.to_le_bytes()), 3);
                case("zero dimension", &|b| put(b, 12, &0u16.to_le_bytes()), 3);
                case("dimension overflow", &|b| {
                    put(b, 8, &u32::MAX.to_le_bytes());
                    put(b, 12, &[0xFF; 6]);
                }, 3);
                case("missing frame", &|b| {
                    let n = u32::from_le_bytes(b[8..12].try_into().unwrap());
                    put(b, 8, &(n + 1).to_le_bytes());
                }, 4);
                case("non-finite sample", &|b| put(b, RECORDING_HEADER_LEN, &f32::NAN.to_le_bytes()), 3);
            }
            "FERF" => {
                case("invalid label", &|b| put(b, 6, &9u16.to_le_bytes()), 3);
                case("dimension overflow", &|b| {
                    put(b, 8, &u32::MAX.to_le_bytes());
                    put(b, 12, &[0xFF; 4]);
                }, 3);
                case("missing window", &|b| {
                    let n = u32::from_le_bytes(b[8..12].try_into().unwrap());
                    put(b, 8, &(n + 1).to_le_bytes());
                }, 4);
            }
            _ => {
                // Layout: magic, version, count, then u16 name_len, name, u8 rank, dims.
                let rank_at = 10 + 2 + 1;
                case("invalid rank", &|b| b[rank_at] = 200, 3);
                case("dimension overflow", &|b| {
                    b[rank_at] = 8;
                    b.truncate(rank_at + 1);
                    b.extend_from_slice(&[0xFF; 32]);
                }, 3);
                case("tensor count too large", &|b| put(b, 6, &1000u32.to_le_bytes()), 4);
            }
        }
    }
    out
}

/// Exit code the decoder's error maps to; 0 when decoding succeeds.
pub fn decode_exit_code(format: &str, bytes: &[u8]) -> i32 {
    let err = match format {
        "FERD" => decode_recording(bytes).err(),
        "FERF" => decode_features(bytes).err(),
        _ => decode_model(bytes).err(),
    };
    err.map_or(0, |e| Error::from(e).exit_code())
}
