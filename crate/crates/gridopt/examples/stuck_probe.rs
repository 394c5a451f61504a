use gridopt::sparse::{PivotOrderDebug, SparseSym};

fn main() {
    let text = std::fs::read_to_string("/tmp/kkt118.txt").unwrap();
    let mut lines = text.lines();
    let head: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    let (dim, _n, _m) = (head[0], head[1], head[2]);
    let mut trips = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() == 3 {
            trips.push((t[0].parse().unwrap(), t[1].parse().unwrap(), t[2].parse::<f64>().unwrap()));
        }
    }
    let mut m = SparseSym::from_lower_triplets(dim, trips);
    match m.factorize() {
        Ok(i) => println!("factorized: ({}, {}, {})", i.pos, i.neg, i.zero),
        Err(e) => println!("failed: {e}"),
    }
    let _ = PivotOrderDebug;
}
