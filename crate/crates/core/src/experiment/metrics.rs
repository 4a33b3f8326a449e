use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Outcome, PickRecord};
use crate::Result;

/// Success rate and purity over one block of executed picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub block: usize,
    /// Executed picks in the block; only the last block may be short.
    pub picks: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub target_px: u64,
    pub total_px: u64,
    /// Target-class pixels over all pixels of the block's successful picks;
    /// empty when no pixels were seen.
    pub purity: Option<f64>,
}

/// Groups executed picks into consecutive blocks of `block_size`.
pub fn block_metrics(log: &[PickRecord], block_size: usize) -> Vec<BlockMetrics> {
    let executed: Vec<&PickRecord> = log.iter().filter(|r| r.outcome == Outcome::Executed).collect();
    executed
        .chunks(block_size.max(1))
        .enumerate()
        .map(|(block, picks)| {
            let mut successes = 0;
            let (mut target_px, mut total_px) = (0u64, 0u64);
            for r in picks {
                let Some(c) = r.counts() else { continue };
                if c.total() > 0 {
                    successes += 1;
                    total_px += c.total();
                    target_px += r.target.map_or(0, |t| c.get(t));
                }
            }
            BlockMetrics {
                block,
                picks: picks.len(),
                successes,
                success_rate: successes as f64 / picks.len() as f64,
                target_px,
                total_px,
                purity: (total_px > 0).then(|| target_px as f64 / total_px as f64),
            }
        })
        .collect()
}

pub fn write_log<W: Write>(w: W, log: &[PickRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in log {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_log<R: Read>(r: R) -> Result<Vec<PickRecord>> {
    let mut input = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in input.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_curves<W: Write>(w: W, blocks: &[BlockMetrics]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for b in blocks {
        out.serialize(b)?;
    }
    out.flush()?;
    Ok(())
}
