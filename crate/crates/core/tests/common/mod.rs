#![allow(dead_code)]

use offerner::corpus::{generate_dataset, parse_template_file, SlotLexicon};
use offerner::Dataset;

pub const TEMPLATES: &str = "\
Get OAMT OTYPE on PRD at MERCH
Enjoy OAMT OTYPE on PRD . Min . purchase MIN_AMT
Flat OAMT OTYPE at MERCH on orders above MIN_AMT
Shop at MERCH and get OAMT OTYPE up to MAX_AMT
OAMT OTYPE on PRD from MERCH , max OTYPE MAX_AMT
";

pub const LEXICON: &str = "\
OAMT\t20%
OAMT\t15%
OAMT\tRs.500
OAMT\t10%
OTYPE\toff
OTYPE\tcashback
OTYPE\tdiscount
MIN_AMT\tRs.1500
MIN_AMT\tRs 999
MAX_AMT\tRs.750
MAX_AMT\tRs 300
PRD\tpizzas
PRD\tflights
PRD\tmovie tickets
MERCH\tDominos
MERCH\tAmazon
MERCH\tBook My Show
";

pub fn lexicon() -> SlotLexicon {
    SlotLexicon::parse(LEXICON).unwrap()
}

pub fn fixture_dataset(n: usize, seed: u64) -> Dataset {
    let templates = parse_template_file(TEMPLATES).unwrap();
    generate_dataset("fixture", &templates, &lexicon(), n, seed).unwrap()
}
