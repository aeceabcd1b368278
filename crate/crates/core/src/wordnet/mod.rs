//! In-memory noun taxonomy built from WordNet 3.0 database files, with
//! Wu–Palmer similarity.
//!
//! Depth convention: a virtual root sits at depth 1 above every top-level
//! noun synset, so `entity` has depth 2. Depth is one plus the shortest
//! hypernym path to the virtual root.
//!
//! Similarity of `a` and `b` is `2·D / (Na + Nb + 2·D)` where the least
//! common subsumer is the common hypernym of greatest depth `D` (ties go to
//! the smaller offset) and `Na`, `Nb` are the shortest hypernym distances
//! from `a` and `b` to it. The value lies in (0, 1] and is 1 only for
//! identical synsets.

mod parse;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordNetError {
    #[error("missing WordNet file {0}")]
    MissingFile(PathBuf),
    #[error("malformed data record at offset {offset}: {reason}")]
    MalformedRecord { offset: u64, reason: String },
    #[error("malformed index line {line}: {reason}")]
    MalformedIndex { line: usize, reason: String },
    #[error("hypernym cycle through offsets {0:?}")]
    CycleDetected(Vec<u64>),
    #[error("unknown synset {0}")]
    UnknownSynset(u64),
    #[error("i/o error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

/// Synset offset in `data.noun`. [`SynsetId::ROOT`] is the virtual root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SynsetId(pub u64);

impl SynsetId {
    pub const ROOT: SynsetId = SynsetId(u64::MAX);
}

#[derive(Debug, Clone)]
struct Synset {
    offset: u64,
    lemmas: Vec<String>,
    hypernyms: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    synsets: Vec<Synset>,
    by_offset: HashMap<u64, usize>,
    lemma_index: HashMap<String, Vec<usize>>,
    /// Min depth per synset, virtual root = 1.
    depth: Vec<u32>,
    /// Longest hypernym chain to the root, same convention. Ranks
    /// candidate subsumers; always strictly greater than any ancestor's.
    rank: Vec<u32>,
}

/// Index of the virtual root in ancestor maps.
const ROOT: usize = usize::MAX;

fn read(path: &Path) -> Result<String, WordNetError> {
    if !path.is_file() {
        return Err(WordNetError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| WordNetError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Parses `data.noun` and `index.noun` from `dir`.
pub fn parse_wordnet(dir: impl AsRef<Path>) -> Result<Taxonomy, WordNetError> {
    let dir = dir.as_ref();
    let data = read(&dir.join("data.noun"))?;
    let index = read(&dir.join("index.noun"))?;
    Taxonomy::from_sources(&data, &index)
}

impl Taxonomy {
    pub fn from_sources(data: &str, index: &str) -> Result<Self, WordNetError> {
        let records = parse::parse_data(data)?;
        let by_offset: HashMap<u64, usize> =
            records.iter().enumerate().map(|(i, r)| (r.offset, i)).collect();
        let mut synsets = Vec::with_capacity(records.len());
        for r in records {
            let hypernyms = r
                .hypernyms
                .iter()
                .map(|t| {
                    by_offset.get(t).copied().ok_or_else(|| WordNetError::MalformedRecord {
                        offset: r.offset,
                        reason: format!("hypernym {t:08} does not exist"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            synsets.push(Synset {
                offset: r.offset,
                lemmas: r.lemmas,
                hypernyms,
            });
        }

        let mut lemma_index: HashMap<String, Vec<usize>> = HashMap::new();
        for (line, entry) in parse::parse_index(index)?.into_iter().enumerate() {
            let ids = entry
                .offsets
                .iter()
                .map(|o| {
                    by_offset.get(o).copied().ok_or_else(|| WordNetError::MalformedIndex {
                        line: line + 1,
                        reason: format!("{} points to missing synset {o:08}", entry.lemma),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            lemma_index.insert(entry.lemma, ids);
        }

        check_acyclic(&synsets)?;
        let depth = min_depths(&synsets);
        let rank = max_depths(&synsets);
        Ok(Self {
            synsets,
            by_offset,
            lemma_index,
            depth,
            rank,
        })
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synset_ids(&self) -> impl Iterator<Item = SynsetId> + '_ {
        self.synsets.iter().map(|s| SynsetId(s.offset))
    }

    fn index_of(&self, id: SynsetId) -> Result<usize, WordNetError> {
        if id == SynsetId::ROOT {
            return Ok(ROOT);
        }
        self.by_offset
            .get(&id.0)
            .copied()
            .ok_or(WordNetError::UnknownSynset(id.0))
    }

    pub fn lemmas(&self, id: SynsetId) -> Result<&[String], WordNetError> {
        match self.index_of(id)? {
            ROOT => Ok(&[]),
            i => Ok(&self.synsets[i].lemmas),
        }
    }

    /// Direct hypernyms; top-level synsets report none.
    pub fn hypernyms(&self, id: SynsetId) -> Result<Vec<SynsetId>, WordNetError> {
        match self.index_of(id)? {
            ROOT => Ok(Vec::new()),
            i => Ok(self.synsets[i]
                .hypernyms
                .iter()
                .map(|&h| SynsetId(self.synsets[h].offset))
                .collect()),
        }
    }

    /// Synsets of a lemma in index order (most frequent sense first).
    /// Lookup lowercases and maps spaces to underscores.
    pub fn synsets_of(&self, lemma: &str) -> Vec<SynsetId> {
        let key = lemma.trim().to_lowercase().replace(' ', "_");
        self.lemma_index
            .get(&key)
            .map(|ids| ids.iter().map(|&i| SynsetId(self.synsets[i].offset)).collect())
            .unwrap_or_default()
    }

    pub fn depth(&self, id: SynsetId) -> Result<u32, WordNetError> {
        Ok(self.depth_of(self.index_of(id)?))
    }

    fn depth_of(&self, i: usize) -> u32 {
        if i == ROOT {
            1
        } else {
            self.depth[i]
        }
    }

    /// Shortest hypernym distance from `start` to each ancestor, itself
    /// included at distance 0 and the virtual root under [`ROOT`].
    fn ancestor_distances(&self, start: usize) -> HashMap<usize, u32> {
        let mut dist = HashMap::new();
        if start == ROOT {
            dist.insert(ROOT, 0);
            return dist;
        }
        let mut queue = VecDeque::from([(start, 0u32)]);
        dist.insert(start, 0);
        while let Some((node, d)) = queue.pop_front() {
            let parents = &self.synsets[node].hypernyms;
            if parents.is_empty() {
                dist.entry(ROOT).or_insert(d + 1);
            }
            for &p in parents {
                if !dist.contains_key(&p) {
                    dist.insert(p, d + 1);
                    queue.push_back((p, d + 1));
                }
            }
        }
        dist
    }

    fn rank_of(&self, i: usize) -> u32 {
        if i == ROOT {
            1
        } else {
            self.rank[i]
        }
    }

    fn offset_key(&self, i: usize) -> u64 {
        if i == ROOT {
            u64::MAX
        } else {
            self.synsets[i].offset
        }
    }

    /// Deepest common hypernym of `a` and `b`, ties to the smaller offset.
    ///
    /// "Deepest" is measured along the longest hypernym chain. Under the
    /// shortest-chain depth an ancestor can outrank its own descendant when
    /// the descendant has a shortcut to the root, and lcs(x, x) would not be
    /// x.
    pub fn lowest_common_subsumer(&self, a: SynsetId, b: SynsetId) -> Result<SynsetId, WordNetError> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        let (lcs, _, _) = self.lcs_with_distances(ia, ib);
        Ok(if lcs == ROOT {
            SynsetId::ROOT
        } else {
            SynsetId(self.synsets[lcs].offset)
        })
    }

    fn lcs_with_distances(&self, a: usize, b: usize) -> (usize, u32, u32) {
        let da = self.ancestor_distances(a);
        let db = self.ancestor_distances(b);
        da.iter()
            .filter_map(|(node, &x)| db.get(node).map(|&y| (*node, x, y)))
            .max_by(|(n1, ..), (n2, ..)| {
                self.rank_of(*n1)
                    .cmp(&self.rank_of(*n2))
                    .then_with(|| self.offset_key(*n2).cmp(&self.offset_key(*n1)))
            })
            .expect("virtual root is a common ancestor")
    }

    pub fn wup_similarity(&self, a: SynsetId, b: SynsetId) -> Result<f64, WordNetError> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        Ok(self.wup_indices(ia, ib))
    }

    fn wup_indices(&self, a: usize, b: usize) -> f64 {
        let (lcs, na, nb) = self.lcs_with_distances(a, b);
        let d = self.depth_of(lcs) as f64;
        2.0 * d / (na as f64 + nb as f64 + 2.0 * d)
    }

    /// Best similarity over all sense pairs; 0.0 when either word is
    /// unknown.
    pub fn lemma_similarity(&self, word_a: &str, word_b: &str) -> f64 {
        let key = |w: &str| w.trim().to_lowercase().replace(' ', "_");
        let (Some(sa), Some(sb)) = (
            self.lemma_index.get(&key(word_a)),
            self.lemma_index.get(&key(word_b)),
        ) else {
            return 0.0;
        };
        let mut best: f64 = 0.0;
        for &a in sa {
            for &b in sb {
                best = best.max(self.wup_indices(a, b));
                if best == 1.0 {
                    return best;
                }
            }
        }
        best
    }

    /// Re-emits the taxonomy as `(data.noun, index.noun)` text holding only
    /// lemmas and hypernym pointers. Offsets are reassigned to the byte
    /// positions of the emitted lines.
    pub fn to_sources(&self) -> (String, String) {
        // every line's length is independent of offset values (8 digits)
        let render = |s: &Synset, offsets: &[u64], own: u64| {
            let mut line = format!("{own:08} 00 n {:02x}", s.lemmas.len());
            for l in &s.lemmas {
                let _ = write!(line, " {l} 0");
            }
            let _ = write!(line, " {:03}", s.hypernyms.len());
            for &h in &s.hypernyms {
                let _ = write!(line, " @ {:08} n 0000", offsets[h]);
            }
            line.push_str(" |  \n");
            line
        };
        let zeros = vec![0u64; self.synsets.len()];
        let mut offsets = Vec::with_capacity(self.synsets.len());
        let mut pos = 0u64;
        for s in &self.synsets {
            offsets.push(pos);
            pos += render(s, &zeros, 0).len() as u64;
        }
        let data: String = self
            .synsets
            .iter()
            .zip(&offsets)
            .map(|(s, &o)| render(s, &offsets, o))
            .collect();

        let mut lemmas: Vec<(&String, &Vec<usize>)> = self.lemma_index.iter().collect();
        lemmas.sort();
        let index: String = lemmas
            .into_iter()
            .map(|(lemma, ids)| {
                let offs: Vec<String> = ids.iter().map(|&i| format!("{:08}", offsets[i])).collect();
                format!("{lemma} n {} 0 {} 0 {}  \n", ids.len(), ids.len(), offs.join(" "))
            })
            .collect();
        (data, index)
    }
}

fn check_acyclic(synsets: &[Synset]) -> Result<(), WordNetError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; synsets.len()];
    for start in 0..synsets.len() {
        if mark[start] != Mark::New {
            continue;
        }
        // explicit stack of (node, next child position)
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = synsets[node].hypernyms.get(*next) {
                *next += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        stack.push((child, 0));
                    }
                    Mark::Active => {
                        let from = stack.iter().position(|(n, _)| *n == child).unwrap_or(0);
                        let cycle = stack[from..].iter().map(|(n, _)| synsets[*n].offset).collect();
                        return Err(WordNetError::CycleDetected(cycle));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(())
}

fn min_depths(synsets: &[Synset]) -> Vec<u32> {
    let mut hyponyms = vec![Vec::new(); synsets.len()];
    for (i, s) in synsets.iter().enumerate() {
        for &h in &s.hypernyms {
            hyponyms[h].push(i);
        }
    }
    let mut depth = vec![0u32; synsets.len()];
    let mut queue = VecDeque::new();
    for (i, s) in synsets.iter().enumerate() {
        if s.hypernyms.is_empty() {
            depth[i] = 2;
            queue.push_back(i);
        }
    }
    while let Some(node) = queue.pop_front() {
        for &child in &hyponyms[node] {
            if depth[child] == 0 {
                depth[child] = depth[node] + 1;
                queue.push_back(child);
            }
        }
    }
    depth
}

fn max_depths(synsets: &[Synset]) -> Vec<u32> {
    let mut hyponyms = vec![Vec::new(); synsets.len()];
    let mut pending: Vec<usize> = synsets.iter().map(|s| s.hypernyms.len()).collect();
    for (i, s) in synsets.iter().enumerate() {
        for &h in &s.hypernyms {
            hyponyms[h].push(i);
        }
    }
    let mut depth = vec![2u32; synsets.len()];
    let mut ready: Vec<usize> = (0..synsets.len()).filter(|&i| pending[i] == 0).collect();
    while let Some(node) = ready.pop() {
        for &child in &hyponyms[node] {
            depth[child] = depth[child].max(depth[node] + 1);
            pending[child] -= 1;
            if pending[child] == 0 {
                ready.push(child);
            }
        }
    }
    depth
}
