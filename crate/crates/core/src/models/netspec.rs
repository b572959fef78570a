use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of Conv1_1 in the published table; every other width scales from it.
pub const FULL_BASE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Conv,
    Pool,
    UpConv,
    /// Channel concat of the previous row with the named encoder level.
    Concat {
        level: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRow {
    pub name: String,
    pub kind: RowKind,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerRow {
    pub fn param_count(&self) -> usize {
        match self.kind {
            RowKind::Conv => self.out_channels * self.in_channels * 9 + self.out_channels,
            RowKind::UpConv => self.in_channels * self.out_channels * 4 + self.out_channels,
            _ => 0,
        }
    }
}

/// Layer table of the U-Net autoencoder. `base = 32` is the published
/// network; smaller bases shrink every width proportionally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub in_channels: usize,
    pub base: usize,
}

impl NetSpec {
    pub fn full(in_channels: usize) -> Self {
        Self { in_channels, base: FULL_BASE }
    }

    pub fn new(in_channels: usize, base: usize) -> Result<Self> {
        let s = Self { in_channels, base };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base == 0 {
            return Err(Error::InvalidArgument(format!(
                "net needs in_channels >= 1 and base >= 1, got {} and {}",
                self.in_channels, self.base
            )));
        }
        Ok(())
    }

    /// Encoder widths of levels 1..=5.
    pub fn widths(&self) -> [usize; 5] {
        let b = self.base;
        [b, 2 * b, 4 * b, 8 * b, 16 * b]
    }

    /// Output width of Conv9_2 (12 in the published table).
    pub fn penultimate(&self) -> usize {
        (12 * self.base).div_ceil(FULL_BASE)
    }

    /// Conv1_1 .. Conv5_2 with Pool1..Pool4.
    pub fn encoder_rows(&self) -> Vec<LayerRow> {
        let w = self.widths();
        let mut rows = Vec::new();
        let mut c = self.in_channels;
        for (lvl, &width) in w.iter().enumerate() {
            let l = lvl + 1;
            rows.push(conv(format!("conv{l}_1"), c, width));
            rows.push(conv(format!("conv{l}_2"), width, width));
            c = width;
            if l < 5 {
                rows.push(LayerRow { name: format!("pool{l}"), kind: RowKind::Pool, in_channels: c, out_channels: c });
            }
        }
        rows
    }

    /// UpConv6 .. Conv9_3 with the four skip concats.
    pub fn decoder_rows(&self) -> Vec<LayerRow> {
        let w = self.widths();
        let mut rows = Vec::new();
        for (i, l) in (6..=9).enumerate() {
            let (from, to) = (w[4 - i], w[3 - i]);
            rows.push(LayerRow {
                name: format!("upconv{l}"),
                kind: RowKind::UpConv,
                in_channels: from,
                out_channels: to,
            });
            rows.push(LayerRow {
                name: "concat".into(),
                kind: RowKind::Concat { level: 4 - i },
                in_channels: to,
                out_channels: 2 * to,
            });
            rows.push(conv(format!("conv{l}_1"), 2 * to, to));
            if l < 9 {
                rows.push(conv(format!("conv{l}_2"), to, to));
            }
        }
        rows.push(conv("conv9_2".into(), w[0], self.penultimate()));
        rows.push(conv("conv9_3".into(), self.penultimate(), 1));
        rows
    }

    pub fn rows(&self) -> Vec<LayerRow> {
        let mut r = self.encoder_rows();
        r.extend(self.decoder_rows());
        r
    }

    pub fn encoder_param_count(&self) -> usize {
        self.encoder_rows().iter().map(LayerRow::param_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.rows().iter().map(LayerRow::param_count).sum()
    }

    /// Channel used by the residual skip: the centre input channel.
    pub fn skip_channel(&self) -> usize {
        self.in_channels / 2
    }
}

fn conv(name: String, i: usize, o: usize) -> LayerRow {
    LayerRow { name, kind: RowKind::Conv, in_channels: i, out_channels: o }
}
