/// Edit operation counts of a minimum-cost Levenshtein alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn add(&mut self, o: &EditCounts) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
    }
}

/// Aligns `hyp` against `reference` with unit costs. Among minimum-cost
/// alignments the traceback prefers substitutions, then deletions.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut c = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diff = usize::from(reference[i - 1] != hyp[j - 1]);
            if d[(i - 1) * w + j - 1] + diff == here {
                c.substitutions += diff;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            c.deletions += 1;
            i -= 1;
        } else {
            c.insertions += 1;
            j -= 1;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_and_insertion() {
        let c = align(&["a", "b", "c"], &["a", "x", "c", "d"]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 1));
    }

    #[test]
    fn empty_sides() {
        assert_eq!(align::<u8>(&[], &[1, 2]).insertions, 2);
        assert_eq!(align::<u8>(&[1, 2], &[]).deletions, 2);
        assert_eq!(align::<u8>(&[], &[]).errors(), 0);
    }
}
