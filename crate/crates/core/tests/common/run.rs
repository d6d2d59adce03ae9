use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use csasr::fst::{read_text, Fst, Semiring, SymbolTable};

/// Every file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn open(p: &Path) -> BufReader<File> {
    BufReader::new(File::open(p).unwrap_or_else(|e| panic!("{}: {e}", p.display())))
}

/// A search graph persisted as AT&T text with sibling symbol files.
pub fn load_graph(dir: &Path, name: &str) -> Fst {
    let base = dir.join(format!("{name}.fst"));
    let syms = |ext: &str| SymbolTable::read(open(&dir.join(format!("{name}.fst.{ext}")))).unwrap();
    read_text(open(&base), Semiring::Tropical, syms("isyms"), syms("osyms")).unwrap()
}
