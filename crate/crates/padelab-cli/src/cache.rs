//! On-disk cache for germs and Pade pairs. Entries are JSON with every
//! coefficient stored as exact decimal strings, so a reload reproduces the
//! in-memory values bit for bit at the same precision.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use padelab::bigseries::{BigComplex, GermAtInfinity};
use padelab::pade::PadePair;

#[derive(Serialize, Deserialize)]
struct StoredCoeff {
    re: String,
    im: String,
}

#[derive(Serialize, Deserialize)]
struct StoredGerm {
    prec: u32,
    coeffs: Vec<StoredCoeff>,
}

#[derive(Serialize, Deserialize)]
struct StoredPair {
    prec: u32,
    n: usize,
    unique: bool,
    rank_margin: f64,
    p: Vec<StoredCoeff>,
    q: Vec<StoredCoeff>,
}

fn pack(cs: &[BigComplex]) -> Vec<StoredCoeff> {
    cs.iter()
        .map(|c| {
            let (re, im) = c.to_decimal_parts();
            StoredCoeff { re, im }
        })
        .collect()
}

fn unpack(cs: &[StoredCoeff], prec: u32) -> Result<Vec<BigComplex>, String> {
    cs.iter()
        .map(|c| BigComplex::from_decimal_parts(prec, &c.re, &c.im))
        .collect()
}

pub fn germ_to_json(germ: &GermAtInfinity) -> String {
    let s = StoredGerm {
        prec: germ.prec(),
        coeffs: pack(germ.coeffs()),
    };
    serde_json::to_string(&s).expect("germ serializes")
}

pub fn germ_from_json(json: &str) -> Result<GermAtInfinity, String> {
    let s: StoredGerm = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let coeffs = unpack(&s.coeffs, s.prec)?;
    GermAtInfinity::new(s.prec, coeffs).map_err(|e| e.to_string())
}

pub fn pair_to_json(pair: &PadePair) -> String {
    let s = StoredPair {
        prec: pair.prec(),
        n: pair.n,
        unique: pair.unique,
        rank_margin: pair.rank_margin,
        p: pack(&pair.p),
        q: pack(&pair.q),
    };
    serde_json::to_string(&s).expect("pair serializes")
}

pub fn pair_from_json(json: &str) -> Result<PadePair, String> {
    let s: StoredPair = serde_json::from_str(json).map_err(|e| e.to_string())?;
    Ok(PadePair::from_parts(
        unpack(&s.p, s.prec)?,
        unpack(&s.q, s.prec)?,
        s.n,
        s.unique,
        s.rank_margin,
        s.prec,
    ))
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()[..32]
            .to_string()
    }

    fn germ_path(&self, spec_hash: &str, order: usize, prec: u32) -> PathBuf {
        let key = Self::key(&["germ", spec_hash, &order.to_string(), &prec.to_string()]);
        self.dir.join(format!("germ-{key}.json"))
    }

    fn pair_path(&self, spec_hash: &str, order: usize, prec: u32, n: usize) -> PathBuf {
        let key = Self::key(&[
            "pair",
            spec_hash,
            &order.to_string(),
            &prec.to_string(),
            &n.to_string(),
        ]);
        self.dir.join(format!("pair-{key}.json"))
    }

    pub fn load_germ(&self, spec_hash: &str, order: usize, prec: u32) -> Option<GermAtInfinity> {
        let json = std::fs::read_to_string(self.germ_path(spec_hash, order, prec)).ok()?;
        germ_from_json(&json).ok()
    }

    pub fn store_germ(
        &self,
        spec_hash: &str,
        order: usize,
        prec: u32,
        germ: &GermAtInfinity,
    ) -> io::Result<()> {
        std::fs::write(self.germ_path(spec_hash, order, prec), germ_to_json(germ))
    }

    pub fn load_pair(
        &self,
        spec_hash: &str,
        order: usize,
        prec: u32,
        n: usize,
    ) -> Option<PadePair> {
        let json = std::fs::read_to_string(self.pair_path(spec_hash, order, prec, n)).ok()?;
        pair_from_json(&json).ok()
    }

    pub fn store_pair(
        &self,
        spec_hash: &str,
        order: usize,
        prec: u32,
        pair: &PadePair,
    ) -> io::Result<()> {
        std::fs::write(
            self.pair_path(spec_hash, order, prec, pair.n),
            pair_to_json(pair),
        )
    }
}
