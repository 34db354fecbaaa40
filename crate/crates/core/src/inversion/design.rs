use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// A binary selection of active sensors among `n_s` candidates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    w: Vec<bool>,
    active: Vec<usize>,
}

impl Design {
    pub fn empty(n_s: usize) -> Self {
        Self {
            w: vec![false; n_s],
            active: Vec::new(),
        }
    }

    pub fn full(n_s: usize) -> Self {
        Self {
            w: vec![true; n_s],
            active: (0..n_s).collect(),
        }
    }

    /// Duplicate indices are rejected.
    pub fn from_active(n_s: usize, active: &[usize]) -> Result<Self> {
        let mut w = vec![false; n_s];
        for &i in active {
            if i >= n_s {
                return Err(invalid(format!("sensor index {i} out of range for {n_s} sensors")));
            }
            if w[i] {
                return Err(invalid(format!("sensor {i} listed twice")));
            }
            w[i] = true;
        }
        Ok(Self::from_weights(w))
    }

    pub fn from_weights(w: Vec<bool>) -> Self {
        let active = w.iter().enumerate().filter(|(_, on)| **on).map(|(i, _)| i).collect();
        Self { w, active }
    }

    pub fn n_s(&self) -> usize {
        self.w.len()
    }

    pub fn n_act(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn weights(&self) -> &[bool] {
        &self.w
    }

    /// Sorted active indices.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, j: usize) -> bool {
        self.w.get(j).copied().unwrap_or(false)
    }

    /// `w + e_j`
    pub fn with(&self, j: usize) -> Result<Self> {
        if j >= self.n_s() {
            return Err(invalid(format!("sensor index {j} out of range")));
        }
        let mut w = self.w.clone();
        w[j] = true;
        Ok(Self::from_weights(w))
    }

    pub fn is_subset_of(&self, other: &Design) -> bool {
        self.n_s() == other.n_s() && self.active.iter().all(|&i| other.contains(i))
    }

    /// Newline-separated sensor indices.
    pub fn to_text(&self) -> String {
        self.active.iter().map(|i| format!("{i}\n")).collect()
    }

    pub fn parse(text: &str, n_s: usize) -> Result<Self> {
        let idx = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad sensor index {l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_active(n_s, &idx)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path, n_s: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::parse(&text, n_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_and_active_agree() {
        let d = Design::from_active(6, &[4, 1]).unwrap();
        assert_eq!(d.active(), &[1, 4]);
        assert_eq!(d.weights(), &[false, true, false, false, true, false]);
        assert_eq!(d.n_act(), 2);
        assert!(d.with(3).unwrap().contains(3));
        assert!(d.is_subset_of(&d.with(0).unwrap()));
    }

    #[test]
    fn bad_indices_rejected() {
        assert!(Design::from_active(3, &[3]).is_err());
        assert!(Design::from_active(3, &[1, 1]).is_err());
        assert!(Design::parse("1\nx\n", 3).is_err());
    }

    #[test]
    fn text_round_trip() {
        let d = Design::from_active(10, &[7, 0, 3]).unwrap();
        assert_eq!(Design::parse(&d.to_text(), 10).unwrap(), d);
        assert_eq!(Design::parse("", 10).unwrap(), Design::empty(10));
    }
}
