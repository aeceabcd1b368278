//! Readers for the `data.noun` / `index.noun` database files.
//!
//! Record framing is checked strictly: the leading offset of every data
//! line must equal its byte position, counts are fixed-width, and every
//! pointer quadruple must be well formed. Glosses and pointer kinds other
//! than hypernyms are skipped.

use super::WordNetError;

pub(super) struct DataRecord {
    pub offset: u64,
    pub lemmas: Vec<String>,
    /// Targets of noun hypernym pointers (`@`, `@i`).
    pub hypernyms: Vec<u64>,
}

pub(super) struct IndexRecord {
    pub lemma: String,
    pub offsets: Vec<u64>,
}

fn is_license_line(line: &str) -> bool {
    line.starts_with("  ")
}

fn malformed(offset: u64, reason: impl Into<String>) -> WordNetError {
    WordNetError::MalformedRecord {
        offset,
        reason: reason.into(),
    }
}

fn parse_offset(field: &str, at: u64) -> Result<u64, WordNetError> {
    if field.len() != 8 || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(at, format!("bad synset offset {field:?}")));
    }
    Ok(field.parse().expect("eight ascii digits"))
}

pub(super) fn parse_data(text: &str) -> Result<Vec<DataRecord>, WordNetError> {
    let mut records = Vec::new();
    let mut position = 0u64;
    for raw_line in text.split_inclusive('\n') {
        let here = position;
        position += raw_line.len() as u64;
        let line = raw_line.trim_end_matches(['\n', '\r']);
        if line.is_empty() || is_license_line(line) {
            continue;
        }
        records.push(parse_data_line(line, here)?);
    }
    Ok(records)
}

fn parse_data_line(line: &str, at: u64) -> Result<DataRecord, WordNetError> {
    let body = match line.find(" | ") {
        Some(i) => &line[..i],
        None => line.trim_end(),
    };
    let mut fields = body.split(' ').filter(|f| !f.is_empty());
    let mut next = |what: &str| fields.next().ok_or_else(|| malformed(at, format!("missing {what}")));

    let offset = parse_offset(next("offset")?, at)?;
    if offset != at {
        return Err(malformed(at, format!("offset field {offset} != byte position {at}")));
    }
    let lex_filenum = next("lex_filenum")?;
    if lex_filenum.len() != 2 || !lex_filenum.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(at, format!("bad lex_filenum {lex_filenum:?}")));
    }
    let ss_type = next("ss_type")?;
    if ss_type != "n" {
        return Err(malformed(at, format!("not a noun synset: {ss_type:?}")));
    }
    let w_cnt = u32::from_str_radix(next("w_cnt")?, 16)
        .map_err(|e| malformed(at, format!("w_cnt: {e}")))?;
    if w_cnt == 0 {
        return Err(malformed(at, "synset without words"));
    }
    let mut lemmas = Vec::with_capacity(w_cnt as usize);
    for _ in 0..w_cnt {
        let word = next("word")?;
        let lex_id = next("lex_id")?;
        if u8::from_str_radix(lex_id, 16).is_err() {
            return Err(malformed(at, format!("bad lex_id {lex_id:?}")));
        }
        lemmas.push(word.to_lowercase());
    }
    let p_cnt_field = next("p_cnt")?;
    if p_cnt_field.len() != 3 {
        return Err(malformed(at, format!("bad p_cnt {p_cnt_field:?}")));
    }
    let p_cnt: u32 = p_cnt_field
        .parse()
        .map_err(|e| malformed(at, format!("p_cnt: {e}")))?;
    let mut hypernyms = Vec::new();
    for _ in 0..p_cnt {
        let symbol = next("pointer symbol")?;
        let target = parse_offset(next("pointer offset")?, at)?;
        let pos = next("pointer pos")?;
        let source_target = next("pointer source/target")?;
        if source_target.len() != 4 || u16::from_str_radix(source_target, 16).is_err() {
            return Err(malformed(at, format!("bad source/target {source_target:?}")));
        }
        if !matches!(pos, "n" | "v" | "a" | "s" | "r") {
            return Err(malformed(at, format!("bad pointer pos {pos:?}")));
        }
        if pos == "n" && (symbol == "@" || symbol == "@i") {
            hypernyms.push(target);
        }
    }
    Ok(DataRecord {
        offset,
        lemmas,
        hypernyms,
    })
}

pub(super) fn parse_index(text: &str) -> Result<Vec<IndexRecord>, WordNetError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || is_license_line(line) {
            continue;
        }
        let bad = |reason: String| WordNetError::MalformedIndex { line: i + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 6 {
            return Err(bad("too few fields".into()));
        }
        let lemma = fields[0].to_lowercase();
        if fields[1] != "n" {
            return Err(bad(format!("not a noun entry: {:?}", fields[1])));
        }
        let count = |f: &str| f.parse::<usize>().map_err(|e| bad(format!("{f:?}: {e}")));
        let synset_cnt = count(fields[2])?;
        let p_cnt = count(fields[3])?;
        // lemma pos synset_cnt p_cnt [ptr]*p_cnt sense_cnt tagsense_cnt [offset]*synset_cnt
        let expected = 4 + p_cnt + 2 + synset_cnt;
        if fields.len() != expected {
            return Err(bad(format!("expected {expected} fields, found {}", fields.len())));
        }
        let offsets = fields[4 + p_cnt + 2..]
            .iter()
            .map(|f| {
                parse_offset(f, 0).map_err(|_| bad(format!("bad synset offset {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(IndexRecord { lemma, offsets });
    }
    Ok(records)
}
