//! The 28 AHCD character classes and their master-stroke grouping.

use std::fmt;

use crate::error::{Error, Result};

/// Number of character classes.
pub const NUM_CLASSES: usize = 28;

/// Number of master-stroke groups.
pub const NUM_GROUPS: usize = 13;

/// Class names in AHCD label order (label 1 is Alef, label 28 is Yaa).
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Alef", "Baa", "Taa", "Thaa", "Gem", "Haa", "Khaa", "Dal", "Zal", "Raa", "Zeen", "Seen",
    "Sheen", "Saad", "Daad", "Taaa", "Zaaa", "Aeen", "Gheen", "Faa", "Qaf", "Kaf", "Lam", "Mem",
    "Noon", "Heh", "Waw", "Yaa",
];

/// A 1-based class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u8);

impl ClassId {
    /// Validates `id` against `1..=num_classes`.
    pub fn new(id: usize, num_classes: usize) -> Result<Self> {
        if id == 0 || id > num_classes || id > u8::MAX as usize {
            return Err(Error::input(format!(
                "class id {id} outside 1..={num_classes}"
            )));
        }
        Ok(ClassId(id as u8))
    }

    /// Class with zero-based index `index`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < u8::MAX as usize, "class index {index} too large");
        ClassId(index as u8 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// Catalog name, or `class<N>` for ids past the AHCD range.
    pub fn name(self) -> String {
        CLASS_NAMES
            .get(self.index())
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("class{}", self.0))
    }

    pub fn all() -> impl Iterator<Item = ClassId> {
        (0..NUM_CLASSES).map(ClassId::from_index)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Looks a class up by catalog name, case-insensitively.
pub fn class_by_name(name: &str) -> Option<ClassId> {
    CLASS_NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(name))
        .map(ClassId::from_index)
}

/// Master-stroke groups over the 28 classes, by 1-based label.
///
/// Characters sharing a base stroke and differing only in dots or small
/// marks share a group. Aeen sits with Gheen; it is not also placed with
/// the Baa family.
pub const MASTER_STROKE_GROUPS: [&[usize]; NUM_GROUPS] = [
    &[1],
    &[2, 3, 4, 25, 28],
    &[5, 6, 7],
    &[8, 9],
    &[10, 11, 27],
    &[12, 13],
    &[14, 15],
    &[16, 17],
    &[18, 19],
    &[20, 21],
    &[22, 23],
    &[24],
    &[26],
];

/// A partition of the 28 classes into labelled groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferencePartition {
    /// `group_of[i]` is the 1-based group of class index `i`.
    group_of: Vec<usize>,
}

impl ReferencePartition {
    /// The 13 master-stroke groups.
    pub fn master_strokes() -> Self {
        let mut group_of = vec![0; NUM_CLASSES];
        for (g, members) in MASTER_STROKE_GROUPS.iter().enumerate() {
            for &label in *members {
                group_of[label - 1] = g + 1;
            }
        }
        debug_assert!(group_of.iter().all(|&g| g > 0));
        ReferencePartition { group_of }
    }

    /// Builds a partition from 1-based group ids, one per class.
    pub fn from_groups(group_of: Vec<usize>) -> Result<Self> {
        if group_of.contains(&0) {
            return Err(Error::input("group ids are 1-based"));
        }
        Ok(ReferencePartition { group_of })
    }

    pub fn group(&self, class: ClassId) -> usize {
        self.group_of[class.index()]
    }

    pub fn groups(&self) -> &[usize] {
        &self.group_of
    }

    pub fn num_groups(&self) -> usize {
        self.group_of.iter().copied().max().unwrap_or(0)
    }

    /// Members of group `g` (1-based), in label order.
    pub fn members(&self, g: usize) -> Vec<ClassId> {
        self.group_of
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == g)
            .map(|(i, _)| ClassId::from_index(i))
            .collect()
    }

    pub fn same_group(&self, a: ClassId, b: ClassId) -> bool {
        self.group(a) == self.group(b)
    }
}
