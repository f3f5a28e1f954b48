//! Aligning a model's echo of the input (tags already stripped) with the
//! original text.
//!
//! Tokens are maximal runs of non-whitespace characters. A longest common
//! subsequence over the two token sequences yields anchor tokens that map
//! character for character; the gaps between anchors become regions whose
//! quality is their character-level similarity.

use std::ops::Range;

/// Largest token DP table computed before falling back to prefix/suffix
/// anchoring only.
const MAX_DP_CELLS: usize = 16_000_000;
/// Largest character DP used to score an inexact region.
const MAX_SIMILARITY_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRegion {
    /// Character range in the stripped completion.
    pub stripped: Range<usize>,
    /// Character range in the original text.
    pub original: Range<usize>,
    /// 1.0 iff both sides are the same text; otherwise character similarity.
    pub quality: f64,
}

impl AlignedRegion {
    pub fn is_exact(&self) -> bool {
        self.quality >= 1.0
    }
}

/// Monotone mapping from stripped-completion offsets to original offsets.
///
/// When any token matched, the regions tile the whole stripped text in order.
/// An empty map means nothing could be aligned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentMap {
    regions: Vec<AlignedRegion>,
}

impl AlignmentMap {
    pub fn regions(&self) -> &[AlignedRegion] {
        &self.regions
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Whether every region is exact, i.e. the texts are identical.
    pub fn is_identity(&self) -> bool {
        self.regions.iter().all(AlignedRegion::is_exact)
    }

    fn region_index(&self, pos: usize) -> Option<usize> {
        let i = self.regions.partition_point(|r| r.stripped.end <= pos);
        (i < self.regions.len() && self.regions[i].stripped.start <= pos).then_some(i)
    }

    /// Quality of the region containing the character at `pos`.
    pub fn quality_at(&self, pos: usize) -> f64 {
        self.region_index(pos)
            .map(|i| self.regions[i].quality)
            .unwrap_or(0.0)
    }

    /// Lowest region quality over the characters of `start..end`.
    pub fn span_quality(&self, start: usize, end: usize) -> f64 {
        (start..end)
            .map(|p| self.quality_at(p))
            .fold(if start < end { 1.0 } else { 0.0 }, f64::min)
    }

    /// Maps a boundary offset. Exact regions map offsets one to one, inexact
    /// regions proportionally; `None` for an empty map or out-of-range input.
    pub fn map_offset(&self, pos: usize) -> Option<usize> {
        let last = self.regions.last()?;
        if pos == last.stripped.end {
            return Some(last.original.end);
        }
        let r = &self.regions[self.region_index(pos)?];
        let offset = pos - r.stripped.start;
        if r.is_exact() {
            Some(r.original.start + offset)
        } else {
            Some(r.original.start + offset * r.original.len() / r.stripped.len())
        }
    }

    /// Maps a span whose characters all lie in exact regions and land on a
    /// contiguous original range.
    pub fn map_span(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        if start >= end {
            return None;
        }
        let mut first = None;
        let mut prev: Option<usize> = None;
        let mut pos = start;
        while pos < end {
            let r = &self.regions[self.region_index(pos)?];
            if !r.is_exact() {
                return None;
            }
            let take_to = r.stripped.end.min(end);
            let mapped_start = r.original.start + (pos - r.stripped.start);
            if let Some(p) = prev {
                if mapped_start != p {
                    return None;
                }
            }
            first.get_or_insert(mapped_start);
            prev = Some(mapped_start + (take_to - pos));
            pos = take_to;
        }
        Some((first?, prev?))
    }
}

#[derive(Debug, Clone, Copy)]
struct Token {
    start: usize,
    end: usize,
}

fn tokenize(chars: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        tokens.push(Token { start, end: i });
    }
    tokens
}

fn token_eq(a: &[char], ta: Token, b: &[char], tb: Token) -> bool {
    a[ta.start..ta.end] == b[tb.start..tb.end]
}

/// Index pairs of an LCS over the token sequences.
fn lcs_pairs(a: &[char], ta: &[Token], b: &[char], tb: &[Token]) -> Vec<(usize, usize)> {
    let mut prefix = 0;
    while prefix < ta.len() && prefix < tb.len() && token_eq(a, ta[prefix], b, tb[prefix]) {
        prefix += 1;
    }
    let mut suffix = 0;
    while suffix < ta.len() - prefix
        && suffix < tb.len() - prefix
        && token_eq(a, ta[ta.len() - 1 - suffix], b, tb[tb.len() - 1 - suffix])
    {
        suffix += 1;
    }
    let mut pairs: Vec<(usize, usize)> = (0..prefix).map(|i| (i, i)).collect();

    let mid_a = &ta[prefix..ta.len() - suffix];
    let mid_b = &tb[prefix..tb.len() - suffix];
    let (n, m) = (mid_a.len(), mid_b.len());
    if n > 0 && m > 0 && (n + 1) * (m + 1) <= MAX_DP_CELLS {
        // lengths[i][j] = LCS of mid_a[i..] and mid_b[j..]
        let width = m + 1;
        let mut lengths = vec![0u32; (n + 1) * width];
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                lengths[i * width + j] = if token_eq(a, mid_a[i], b, mid_b[j]) {
                    lengths[(i + 1) * width + j + 1] + 1
                } else {
                    lengths[(i + 1) * width + j].max(lengths[i * width + j + 1])
                };
            }
        }
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            if token_eq(a, mid_a[i], b, mid_b[j]) {
                pairs.push((prefix + i, prefix + j));
                i += 1;
                j += 1;
            } else if lengths[(i + 1) * width + j] >= lengths[i * width + j + 1] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    pairs.extend((0..suffix).map(|k| (ta.len() - suffix + k, tb.len() - suffix + k)));
    pairs
}

/// Character-level similarity `2·LCS / (|a| + |b|)`.
fn similarity(a: &[char], b: &[char]) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() || a.len() * b.len() > MAX_SIMILARITY_CELLS {
        return 0.0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let lcs = prev[b.len()];
    // Never report a perfect score for unequal texts.
    (2.0 * lcs as f64 / (a.len() + b.len()) as f64).min(0.999)
}

/// Splits a gap into alternating whitespace / non-whitespace segments.
fn segments(chars: &[char], range: Range<usize>) -> Vec<(bool, Range<usize>)> {
    let mut out: Vec<(bool, Range<usize>)> = Vec::new();
    for i in range {
        let ws = chars[i].is_whitespace();
        match out.last_mut() {
            Some((kind, r)) if *kind == ws => r.end = i + 1,
            _ => out.push((ws, i..i + 1)),
        }
    }
    out
}

fn push_gap(
    regions: &mut Vec<AlignedRegion>,
    a: &[char],
    gap_a: Range<usize>,
    b: &[char],
    gap_b: Range<usize>,
) {
    if gap_a.is_empty() {
        // Nothing in the completion to map; skipped original text needs no region.
        return;
    }
    let seg_a = segments(a, gap_a.clone());
    let seg_b = segments(b, gap_b.clone());
    let same_shape =
        seg_a.len() == seg_b.len() && seg_a.iter().zip(&seg_b).all(|((ka, _), (kb, _))| ka == kb);
    if same_shape {
        for ((_, ra), (_, rb)) in seg_a.into_iter().zip(seg_b) {
            let quality = similarity(&a[ra.clone()], &b[rb.clone()]);
            regions.push(AlignedRegion {
                stripped: ra,
                original: rb,
                quality,
            });
        }
    } else {
        let quality = similarity(&a[gap_a.clone()], &b[gap_b.clone()]);
        regions.push(AlignedRegion {
            stripped: gap_a,
            original: gap_b,
            quality,
        });
    }
}

/// Aligns the tag-stripped completion with the original text.
pub fn align_texts(stripped: &str, original: &str) -> AlignmentMap {
    let a: Vec<char> = stripped.chars().collect();
    let b: Vec<char> = original.chars().collect();
    if a.is_empty() {
        return AlignmentMap::default();
    }
    if a == b {
        return AlignmentMap {
            regions: vec![AlignedRegion {
                stripped: 0..a.len(),
                original: 0..b.len(),
                quality: 1.0,
            }],
        };
    }
    let ta = tokenize(&a);
    let tb = tokenize(&b);
    let pairs = lcs_pairs(&a, &ta, &b, &tb);
    if pairs.is_empty() {
        return AlignmentMap::default();
    }

    let mut regions = Vec::new();
    let (mut pos_a, mut pos_b) = (0, 0);
    for (ia, ib) in pairs {
        let (tok_a, tok_b) = (ta[ia], tb[ib]);
        push_gap(&mut regions, &a, pos_a..tok_a.start, &b, pos_b..tok_b.start);
        regions.push(AlignedRegion {
            stripped: tok_a.start..tok_a.end,
            original: tok_b.start..tok_b.end,
            quality: 1.0,
        });
        pos_a = tok_a.end;
        pos_b = tok_b.end;
    }
    push_gap(&mut regions, &a, pos_a..a.len(), &b, pos_b..b.len());
    AlignmentMap { regions }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_map_identically() {
        let map = align_texts("abc def", "abc def");
        assert!(map.is_identity());
        for p in 0..=7 {
            assert_eq!(map.map_offset(p), Some(p));
        }
        assert_eq!(map.span_quality(0, 7), 1.0);
        assert_eq!(map.map_span(4, 7), Some((4, 7)));
    }

    #[test]
    fn changed_final_token_is_flagged() {
        let map = align_texts("abc deX", "abc def");
        for p in 0..=4 {
            assert_eq!(map.map_offset(p), Some(p));
        }
        for p in 0..4 {
            assert_eq!(map.quality_at(p), 1.0);
        }
        let q = map.quality_at(5);
        assert!(q < 1.0 && q > 0.0, "{q}");
        assert_eq!(map.map_span(0, 3), Some((0, 3)));
        assert_eq!(map.map_span(4, 7), None);
    }

    #[test]
    fn empty_and_disjoint_inputs_give_empty_map() {
        assert!(align_texts("", "abc").is_empty());
        let disjoint = align_texts("xyz", "abc");
        assert!(disjoint.is_empty());
        assert_eq!(disjoint.map_offset(0), None);
        assert_eq!(disjoint.quality_at(0), 0.0);
    }

    #[test]
    fn inserted_and_dropped_words_keep_anchors() {
        let original = "Pedro Pereira is the president of Peru.";
        let stripped = "Sure: Pedro Pereira is president of Peru.";
        let map = align_texts(stripped, original);
        // "Pedro" at 6 in the completion, 0 in the original.
        assert_eq!(map.map_span(6, 19), Some((0, 13)));
        assert_eq!(map.map_span(36, 40), Some((34, 38)));
    }

    #[test]
    fn whitespace_changes_inside_a_span_block_direct_mapping() {
        let map = align_texts("New  York rocks", "New York rocks");
        assert_eq!(map.map_span(0, 3), Some((0, 3)));
        assert_eq!(map.map_span(0, 9), None);
        assert_eq!(map.map_span(10, 15), Some((9, 14)));
    }

    #[test]
    fn map_offset_is_monotone_on_a_messy_pair() {
        let map = align_texts(
            "the  quick brown fax jumps!! over",
            "a quick brown fox jumps over the dog",
        );
        let mut prev = 0;
        for p in 0..="the  quick brown fax jumps!! over".chars().count() {
            let m = map.map_offset(p).unwrap();
            assert!(m >= prev, "offset {p}: {m} < {prev}");
            prev = m;
        }
    }
}
