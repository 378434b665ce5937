//! DSDICT v1 container.
//!
//! One text header line, `DSDICT v1 <atom_dim> <K>`, optionally followed by
//! ` k=<k> blocks=<n> lr_side=<s> blur_side=<b> blur_sigma=<sigma>` when the
//! LR bank is stored too. The header is followed by little-endian `f64`
//! values: the HR atoms column by column, then (with a bank) the target
//! dictionary and the `n` base dictionaries in shift-index order.

use std::fs;
use std::path::Path;

use crate::degradation::gaussian_kernel;
use crate::error::{Error, Result};
use crate::registration::{build_base_bank, BaseDictionaryBank};
use crate::sparse::Dictionary;

const MAGIC: &str = "DSDICT";
const VERSION: &str = "v1";

/// Degradation parameters the bank was derived with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankMeta {
    pub k: usize,
    pub lr_side: usize,
    pub blur_side: usize,
    pub blur_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryFile {
    pub hr: Dictionary,
    pub bank: Option<(BankMeta, BaseDictionaryBank)>,
}

impl DictionaryFile {
    /// Derives the bank for `hr` and bundles both.
    pub fn with_bank(hr: Dictionary, meta: BankMeta) -> Result<Self> {
        let bank = derive_bank(&hr, &meta)?;
        Ok(Self { hr, bank: Some((meta, bank)) })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC} {VERSION} {} {}", self.hr.atom_dim(), self.hr.n_atoms());
        if let Some((meta, bank)) = &self.bank {
            header.push_str(&format!(
                " k={} blocks={} lr_side={} blur_side={} blur_sigma={}",
                meta.k,
                bank.n_shifts(),
                meta.lr_side,
                meta.blur_side,
                meta.blur_sigma
            ));
        }
        header.push('\n');
        let mut out = header.into_bytes();
        let mut put = |d: &Dictionary| {
            for v in d.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        put(&self.hr);
        if let Some((_, bank)) = &self.bank {
            put(bank.target_dict());
            for b in bank.bases() {
                put(b);
            }
        }
        out
    }

    /// Parses a container. With `verify`, the bank is rebuilt from the HR
    /// atoms and must agree with the stored blocks.
    pub fn from_bytes(bytes: &[u8], verify: bool) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(MAGIC) {
            return Err(Error::Format("not a DSDICT file".into()));
        }
        if fields.next() != Some(VERSION) {
            return Err(Error::Format("unsupported DSDICT version".into()));
        }
        let mut number = |what: &str| -> Result<usize> {
            fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad or missing {what} in header")))
        };
        let atom_dim = number("atom_dim")?;
        let n_atoms = number("K")?;
        let extras: Vec<&str> = fields.collect();
        let meta = parse_meta(&extras)?;

        let body = &bytes[newline + 1..];
        if body.len() % 8 != 0 {
            return Err(Error::Format("payload is not a whole number of f64 values".into()));
        }
        let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let hr_len = atom_dim * n_atoms;
        let expected = match &meta {
            None => hr_len,
            Some((m, blocks)) => {
                let q = m.lr_side * m.lr_side;
                let q_aux = (m.lr_side - 1) * (m.lr_side - 1);
                hr_len + q * n_atoms + blocks * q_aux * n_atoms
            }
        };
        if values.len() != expected {
            return Err(Error::Format(format!("payload has {} values, header implies {expected}", values.len())));
        }
        let hr = Dictionary::new(atom_dim, n_atoms, values[..hr_len].to_vec())?;
        let Some((meta, blocks)) = meta else {
            return Ok(Self { hr, bank: None });
        };
        let q = meta.lr_side * meta.lr_side;
        let q_aux = (meta.lr_side - 1) * (meta.lr_side - 1);
        let mut at = hr_len;
        let mut take = |rows: usize| -> Result<Dictionary> {
            let d = Dictionary::new(rows, n_atoms, values[at..at + rows * n_atoms].to_vec());
            at += rows * n_atoms;
            d
        };
        let target = take(q)?;
        let bases = (0..blocks).map(|_| take(q_aux)).collect::<Result<Vec<_>>>()?;
        let stored = BaseDictionaryBank::from_parts(meta.k, meta.lr_side, target, bases)?;
        if verify {
            let rebuilt = derive_bank(&hr, &meta)?;
            if !banks_agree(&stored, &rebuilt) {
                return Err(Error::Format("stored LR bank does not match the HR dictionary".into()));
            }
            return Ok(Self { hr, bank: Some((meta, rebuilt)) });
        }
        Ok(Self { hr, bank: Some((meta, stored)) })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, verify: bool) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, verify)
    }
}

fn parse_meta(extras: &[&str]) -> Result<Option<(BankMeta, usize)>> {
    if extras.is_empty() {
        return Ok(None);
    }
    let get = |key: &str| -> Result<&str> {
        extras
            .iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Format(format!("header lacks {key}=")))
    };
    let bad = |key: &str| Error::Format(format!("bad {key} value in header"));
    let k: usize = get("k")?.parse().map_err(|_| bad("k"))?;
    let blocks: usize = get("blocks")?.parse().map_err(|_| bad("blocks"))?;
    let lr_side: usize = get("lr_side")?.parse().map_err(|_| bad("lr_side"))?;
    let blur_side: usize = get("blur_side")?.parse().map_err(|_| bad("blur_side"))?;
    let blur_sigma: f64 = get("blur_sigma")?.parse().map_err(|_| bad("blur_sigma"))?;
    if lr_side < 2 || blocks != (k + 1) * (k + 1) {
        return Err(Error::Format(format!("inconsistent bank geometry k={k} blocks={blocks} lr_side={lr_side}")));
    }
    Ok(Some((BankMeta { k, lr_side, blur_side, blur_sigma }, blocks)))
}

fn derive_bank(hr: &Dictionary, meta: &BankMeta) -> Result<BaseDictionaryBank> {
    let kernel = gaussian_kernel(meta.blur_side, meta.blur_sigma)?;
    let bank = build_base_bank(hr, &kernel, meta.k)?;
    if bank.lr_side() != meta.lr_side {
        return Err(Error::Dimension(format!(
            "HR atoms give LR side {}, expected {}",
            bank.lr_side(),
            meta.lr_side
        )));
    }
    Ok(bank)
}

fn banks_agree(a: &BaseDictionaryBank, b: &BaseDictionaryBank) -> bool {
    let close = |x: &Dictionary, y: &Dictionary| {
        x.atom_dim() == y.atom_dim()
            && x.n_atoms() == y.n_atoms()
            && x.as_slice().iter().zip(y.as_slice()).all(|(u, v)| (u - v).abs() <= 1e-9)
    };
    a.k() == b.k()
        && close(a.target_dict(), b.target_dict())
        && a.bases().len() == b.bases().len()
        && a.bases().iter().zip(b.bases()).all(|(x, y)| close(x, y))
}
