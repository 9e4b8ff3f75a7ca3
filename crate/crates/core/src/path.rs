//! Node addresses in a binary tree: the sequence of edge signs from the root.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Sign;
use crate::error::{Error, Result};

/// Path from the root to a node, e.g. `++-`. The empty path is the root.
///
/// Paths order shortest first, then `+` before `-` position by position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PathIndex(Vec<Sign>);

impl PathIndex {
    pub fn root() -> Self {
        PathIndex(Vec::new())
    }

    pub fn from_signs(signs: Vec<Sign>) -> Self {
        PathIndex(signs)
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// The parent path `s̄`. Fails on the root.
    pub fn parent(&self) -> Result<PathIndex> {
        match self.0.split_last() {
            Some((_, rest)) => Ok(PathIndex(rest.to_vec())),
            None => Err(Error::Path("the root has no parent".into())),
        }
    }

    /// The last edge `ṡ`. Fails on the root.
    pub fn last(&self) -> Result<Sign> {
        self.0.last().copied().ok_or_else(|| Error::Path("the root has no last edge".into()))
    }

    pub fn child(&self, sign: Sign) -> PathIndex {
        let mut signs = self.0.clone();
        signs.push(sign);
        PathIndex(signs)
    }

    /// True when `self` lies on the path from the root to `other` (inclusive).
    pub fn is_prefix_of(&self, other: &PathIndex) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Strips `prefix`, re-rooting the path; `None` when `prefix` is not a prefix.
    pub fn strip_prefix(&self, prefix: &PathIndex) -> Option<PathIndex> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|s| PathIndex(s.to_vec()))
    }

    pub fn join(&self, suffix: &PathIndex) -> PathIndex {
        let mut signs = self.0.clone();
        signs.extend_from_slice(&suffix.0);
        PathIndex(signs)
    }

    /// All proper prefixes from the root down to the parent.
    pub fn ancestors(&self) -> impl Iterator<Item = PathIndex> + '_ {
        (0..self.0.len()).map(move |k| PathIndex(self.0[..k].to_vec()))
    }
}

impl Ord for PathIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for PathIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PathIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PathIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| Sign::from_char(c).ok_or_else(|| Error::Path(format!("invalid character `{c}` in `{s}`"))))
            .collect::<Result<Vec<_>>>()
            .map(PathIndex)
    }
}

impl Serialize for PathIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PathIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_and_last() {
        let s: PathIndex = "++-".parse().unwrap();
        assert_eq!(s.parent().unwrap().to_string(), "++");
        assert_eq!(s.last().unwrap(), Sign::Minus);
        assert_eq!(s.parent().unwrap().child(s.last().unwrap()), s);

        let one: PathIndex = "+".parse().unwrap();
        assert!(one.parent().unwrap().is_root());
        assert_eq!(one.last().unwrap(), Sign::Plus);

        assert!(PathIndex::root().parent().is_err());
        assert!(PathIndex::root().last().is_err());
    }

    #[test]
    fn ordering_is_shortlex() {
        let mut v: Vec<PathIndex> = ["-", "++", "", "+-", "+", "--", "-+"].iter().map(|s| s.parse().unwrap()).collect();
        v.sort();
        let got: Vec<String> = v.iter().map(|p| p.to_string()).collect();
        assert_eq!(got, vec!["", "+", "-", "++", "+-", "-+", "--"]);
    }

    #[test]
    fn prefixes() {
        let s: PathIndex = "+-+".parse().unwrap();
        let p: PathIndex = "+".parse().unwrap();
        assert!(p.is_prefix_of(&s));
        assert!(PathIndex::root().is_prefix_of(&s));
        assert_eq!(s.strip_prefix(&p).unwrap().to_string(), "-+");
        assert_eq!(p.join(&"-+".parse().unwrap()), s);
        let anc: Vec<String> = s.ancestors().map(|a| a.to_string()).collect();
        assert_eq!(anc, vec!["", "+", "+-"]);
        assert!("+x".parse::<PathIndex>().is_err());
    }
}
