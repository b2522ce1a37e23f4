//! Domain labelling against ordered surfaces.
//!
//! Each block carries a sign per surface: +1 above, −1 below, 0 across.
//! Surfaces are ordered top-down; a layered block reads −1 for the surfaces
//! over it and +1 for those under it.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct TaggingInstruction {
    /// Mesh path or name; the ordinal is the instruction's position.
    pub surface: String,
    pub positive: Vec3,
    pub above: i64,
    pub across: i64,
    pub below: i64,
    pub forced: bool,
}

impl TaggingInstruction {
    pub fn new(
        surface: impl Into<String>,
        positive: Vec3,
        above: i64,
        across: i64,
        below: i64,
        forced: bool,
    ) -> Result<Self> {
        let positive = positive.normalized().ok_or(Error::NonFinite)?;
        Ok(TaggingInstruction { surface: surface.into(), positive, above, across, below, forced })
    }

    /// Every position retains the current label.
    pub fn retain(surface: impl Into<String>) -> Self {
        TaggingInstruction {
            surface: surface.into(),
            positive: Vec3::Z,
            above: -1,
            across: -1,
            below: -1,
            forced: false,
        }
    }

    fn lambda(&self, sigma: i8) -> i64 {
        match sigma {
            1 => self.above,
            0 => self.across,
            _ => self.below,
        }
    }
}

/// Odd for layers, even for boundaries.
pub fn abstract_label(n: usize, sigma: i8) -> i64 {
    2 * (n as i64 + 1) - sigma as i64
}

/// Sign of one block against one surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceSign {
    pub sigma: i8,
    /// Cells of the block whose centroids lie above the surface.
    pub above_cells: u64,
    pub below_cells: u64,
}

impl SurfaceSign {
    pub fn side(sigma: i8) -> SurfaceSign {
        SurfaceSign { sigma, above_cells: 0, below_cells: 0 }
    }

    /// Across, with cell counts for forced resolution.
    pub fn across(above_cells: u64, below_cells: u64) -> SurfaceSign {
        SurfaceSign { sigma: 0, above_cells, below_cells }
    }

    /// Majority side when across; ties go above.
    pub fn forced(self) -> i8 {
        match self.sigma {
            0 if self.above_cells >= self.below_cells => 1,
            0 => -1,
            s => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagInput {
    pub label: i64,
    /// One entry per surface, `None` where no sign was computed.
    pub signs: Vec<Option<SurfaceSign>>,
}

/// Affiliated surface and sign from a top-down sign vector.
pub fn affiliated_surface(sigma: &[i8]) -> Result<(usize, i8)> {
    if sigma.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = sigma.iter().take_while(|&&s| s == -1).count();
    let z = sigma[k..].iter().take_while(|&&s| s == 0).count();
    if sigma[k + z..].iter().any(|&s| s != 1) {
        return Err(Error::InconsistentSidedness(sigma.to_vec()));
    }
    Ok(if z > 0 {
        (k, 0)
    } else if k == 0 {
        (0, 1)
    } else {
        (k - 1, -1)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    /// One instruction per block, chosen by its affiliated surface.
    #[default]
    Affiliated,
    /// Every instruction in order; later ones overwrite earlier ones.
    Sequential,
}

fn resolved(b: &TagInput, ins: &[TaggingInstruction], s: usize) -> Result<i8> {
    let sg = b.signs.get(s).copied().flatten().ok_or(Error::MissingSidedness(s))?;
    Ok(if ins[s].forced { sg.forced() } else { sg.sigma })
}

fn assign(current: i64, lambda: i64, n: usize, sigma: i8) -> i64 {
    match lambda {
        l if l > 0 => l,
        0 => abstract_label(n, sigma),
        _ => current,
    }
}

pub fn tag_block(b: &TagInput, ins: &[TaggingInstruction], mode: TagMode) -> Result<i64> {
    if ins.is_empty() {
        return Ok(b.label);
    }
    match mode {
        TagMode::Affiliated => {
            let sigma = (0..ins.len()).map(|s| resolved(b, ins, s)).collect::<Result<Vec<_>>>()?;
            let (n, s) = affiliated_surface(&sigma)?;
            Ok(assign(b.label, ins[n].lambda(s), n, s))
        }
        TagMode::Sequential => {
            let mut label = b.label;
            for n in 0..ins.len() {
                let s = resolved(b, ins, n)?;
                label = assign(label, ins[n].lambda(s), n, s);
            }
            Ok(label)
        }
    }
}

pub fn apply_tagging(blocks: &[TagInput], ins: &[TaggingInstruction], mode: TagMode) -> Result<Vec<i64>> {
    blocks.iter().map(|b| tag_block(b, ins, mode)).collect()
}

/// No instruction can change a label.
pub fn all_retain(ins: &[TaggingInstruction]) -> bool {
    ins.iter().all(|i| i.above < 0 && i.across < 0 && i.below < 0)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// One instruction per line:
/// `surface=<path> positive=<ux,uy,uz> above=<int> across=<int> below=<int> forced=<0|1>`.
/// Blank lines and `#` comments are skipped.
pub fn parse_instructions(text: &str) -> Result<Vec<TaggingInstruction>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut surface = None;
        let mut positive = None;
        let mut lam = [None; 3];
        let mut forced = None;
        for tok in line.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| perr(ln, format!("expected key=value, got '{tok}'")))?;
            let int = || v.parse::<i64>().map_err(|_| perr(ln, format!("bad integer for {k}: '{v}'")));
            match k {
                "surface" => surface = Some(v.to_string()),
                "positive" => {
                    let c: Vec<f64> = v
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(ln, format!("bad vector '{v}'")))?;
                    if c.len() != 3 {
                        return Err(perr(ln, format!("positive needs 3 components, got {}", c.len())));
                    }
                    positive = Some(Vec3::new(c[0], c[1], c[2]));
                }
                "above" => lam[0] = Some(int()?),
                "across" => lam[1] = Some(int()?),
                "below" => lam[2] = Some(int()?),
                "forced" => {
                    forced = Some(match v {
                        "0" => false,
                        "1" => true,
                        _ => return Err(perr(ln, format!("forced must be 0 or 1, got '{v}'"))),
                    })
                }
                _ => return Err(perr(ln, format!("unknown key '{k}'"))),
            }
        }
        let missing = |name: &str| perr(ln, format!("missing {name}"));
        let surface = surface.ok_or_else(|| missing("surface"))?;
        let positive = positive.unwrap_or(Vec3::Z);
        let ins = TaggingInstruction::new(
            surface,
            positive,
            lam[0].ok_or_else(|| missing("above"))?,
            lam[1].ok_or_else(|| missing("across"))?,
            lam[2].ok_or_else(|| missing("below"))?,
            forced.unwrap_or(false),
        )
        .map_err(|_| perr(ln, "positive direction must be finite and non-zero"))?;
        out.push(ins);
    }
    Ok(out)
}

pub fn instructions_to_text(ins: &[TaggingInstruction]) -> String {
    ins.iter()
        .map(|i| {
            format!(
                "surface={} positive={},{},{} above={} across={} below={} forced={}\n",
                i.surface, i.positive.x, i.positive.y, i.positive.z, i.above, i.across, i.below, i.forced as u8
            )
        })
        .collect()
}
