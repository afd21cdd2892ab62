//! Binary dump of value and policy tables.
//!
//! Layout (little-endian):
//!
//! ```text
//! "ELVT"  u16 version  u16 flags  u32 Ξ
//! Ξ × (u16 radix, u8 due)
//! u64 iterations  f64 residual  f64 discount  u64 count
//! count × (u64 key, f64 value)              keys 0..count in order
//! [flags & 1] count × (u64 key, Ξ × u16)    greedy action per state
//! ```
//!
//! Flag bit 1 marks a converged table.

use super::{PolicyTable, StateSpace, ValueTable};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ELVT";
const VERSION: u16 = 1;
const HAS_POLICY: u16 = 1;
const CONVERGED: u16 = 2;

pub struct DecodedTable {
    pub values: ValueTable,
    pub policy: Option<PolicyTable>,
}

pub fn encode_table(values: &ValueTable, policy: Option<&PolicyTable>) -> Result<Vec<u8>> {
    let space = &values.space;
    if let Some(p) = policy {
        if p.space != *space {
            return Err(Error::ShapeMismatch {
                expected: space.len(),
                got: p.space.len(),
            });
        }
    }
    let xi = space.radix.len();
    let mut out = Vec::with_capacity(32 + xi * 3 + space.len() * (16 + 8 + 2 * xi));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mut flags = 0;
    if policy.is_some() {
        flags |= HAS_POLICY;
    }
    if values.converged {
        flags |= CONVERGED;
    }
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(xi as u32).to_le_bytes());
    for (&r, &d) in space.radix.iter().zip(&space.due) {
        out.extend_from_slice(&(r as u16).to_le_bytes());
        out.push(u8::from(d));
    }
    out.extend_from_slice(&values.iterations.to_le_bytes());
    out.extend_from_slice(&values.residual.to_le_bytes());
    out.extend_from_slice(&values.discount.to_le_bytes());
    out.extend_from_slice(&(space.len() as u64).to_le_bytes());
    for (k, v) in values.values.iter().enumerate() {
        out.extend_from_slice(&(k as u64).to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(p) = policy {
        for (k, act) in p.actions.chunks(xi.max(1)).enumerate().take(space.len()) {
            out.extend_from_slice(&(k as u64).to_le_bytes());
            for &m in act.iter().take(xi) {
                out.extend_from_slice(&m.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode(format!("truncated input at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_table(bytes: &[u8]) -> Result<DecodedTable> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let flags = r.u16()?;
    if flags & !(HAS_POLICY | CONVERGED) != 0 {
        return Err(Error::Decode(format!("unknown flags {flags:#x}")));
    }
    let xi = r.u32()? as usize;
    if xi.checked_mul(3).is_none_or(|n| n > r.remaining()) {
        return Err(Error::Decode(format!("type count {xi} exceeds input")));
    }
    let mut radix = Vec::with_capacity(xi);
    let mut due = Vec::with_capacity(xi);
    for t in 0..xi {
        let rd = r.u16()?;
        let d = r.u8()?;
        if rd == 0 || d > 1 {
            return Err(Error::Decode(format!("bad layout entry for type {t}")));
        }
        radix.push(u32::from(rd));
        due.push(d == 1);
    }
    let iterations = r.u64()?;
    let residual = r.f64()?;
    let discount = r.f64()?;
    if residual.is_nan() || residual < 0.0 {
        return Err(Error::Decode(format!("bad residual {residual}")));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Decode(format!("bad discount {discount}")));
    }
    let count = r.u64()?;
    // bound the allocation by what the input can actually hold
    if count.checked_mul(16).is_none_or(|n| n > r.remaining() as u64) {
        return Err(Error::Decode(format!("record count {count} exceeds input")));
    }
    let space = StateSpace::from_parts(radix, due, count)
        .map_err(|_| Error::Decode("layout does not match record count".into()))?;
    if space.len() as u64 != count {
        return Err(Error::Decode(format!(
            "layout holds {} states, header says {count}",
            space.len()
        )));
    }
    let mut values = Vec::with_capacity(space.len());
    for k in 0..count {
        let key = r.u64()?;
        if key != k {
            return Err(Error::Decode(format!(
                "value keys must be complete and ascending: expected {k}, got {key}"
            )));
        }
        let v = r.f64()?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Decode(format!("value at key {k} is {v}")));
        }
        values.push(v);
    }
    let policy = if flags & HAS_POLICY != 0 {
        let rec = 8 + 2 * xi as u64;
        if count.checked_mul(rec).is_none_or(|n| n > r.remaining() as u64) {
            return Err(Error::Decode("policy section truncated".into()));
        }
        let mut actions = Vec::with_capacity(space.len() * xi);
        let mut counts = vec![0u32; xi];
        for k in 0..count {
            let key = r.u64()?;
            if key != k {
                return Err(Error::Decode(format!(
                    "policy keys must be complete and ascending: expected {k}, got {key}"
                )));
            }
            space.decode_into(k as usize, &mut counts);
            for t in 0..xi {
                let m = u32::from(r.u16()?);
                let n = counts[t];
                if m > n || (space.due[t] && m != n) {
                    return Err(Error::Decode(format!(
                        "policy action at key {k} is infeasible for type {t}"
                    )));
                }
                actions.push(m as u16);
            }
        }
        Some(PolicyTable {
            space: space.clone(),
            actions,
        })
    } else {
        None
    };
    if r.remaining() != 0 {
        return Err(Error::Decode(format!("{} trailing bytes", r.remaining())));
    }
    Ok(DecodedTable {
        values: ValueTable {
            space,
            values,
            iterations,
            residual,
            discount,
            converged: flags & CONVERGED != 0,
        },
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{value_iteration, ViOptions};
    use crate::model::fixtures::small_config;
    use crate::model::Model;

    fn solved() -> (ValueTable, PolicyTable) {
        let mut cfg = small_config();
        cfg.specialties.truncate(1);
        for g in &mut cfg.specialties[0].urgency_groups {
            g.arrival_cap = Some(1);
        }
        let m = Model::new(cfg).unwrap();
        value_iteration(&m, &ViOptions::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let (v, p) = solved();
        let bytes = encode_table(&v, Some(&p)).unwrap();
        let d = decode_table(&bytes).unwrap();
        assert_eq!(d.values.values, v.values);
        assert_eq!(d.values.iterations, v.iterations);
        assert_eq!(d.values.converged, v.converged);
        assert_eq!(d.policy.unwrap().actions, p.actions);

        let bytes = encode_table(&v, None).unwrap();
        assert!(decode_table(&bytes).unwrap().policy.is_none());
    }

    #[test]
    fn rejects_corruption() {
        let (v, p) = solved();
        let bytes = encode_table(&v, Some(&p)).unwrap();
        assert!(decode_table(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_table(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_table(&extra).is_err());
        // make the first stored value negative
        let xi = v.space.radix.len();
        let first_value = 12 + xi * 3 + 32 + 8;
        let mut neg = bytes.clone();
        neg[first_value..first_value + 8].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode_table(&neg).is_err());
    }
}
