//! Minimal CSV writer: header row, shortest round-trip floats, LF endings.

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            // Debug formatting of f64 is the shortest string that round-trips.
            Cell::Num(x) => write!(f, "{x:?}"),
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv {
            columns: header.len(),
            text: String::new(),
        };
        c.line(header.iter().map(|h| Cell::from(*h)).collect());
        c
    }

    fn line(&mut self, cells: Vec<Cell>) {
        let parts: Vec<String> = cells.iter().map(Cell::to_string).collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "row width differs from header");
        self.line(cells);
    }

    /// A trailing `# key,value` line.
    pub fn footer(&mut self, key: &str, value: Cell) {
        self.text.push_str(&format!("# {key},{value}\n"));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.506628274631, -0.0, 6.02e23] {
            let s = Cell::Num(x).to_string();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn layout() {
        let mut c = Csv::new(&["r", "err", "ratio"]);
        c.row(vec![8usize.into(), 0.5.into(), Cell::Empty]);
        c.row(vec![16usize.into(), 0.25.into(), Cell::Text("a,b".into())]);
        c.footer("slope", 2.0.into());
        assert_eq!(c.as_str(), "r,err,ratio\n8,0.5,\n16,0.25,\"a,b\"\n# slope,2.0\n");
    }
}
