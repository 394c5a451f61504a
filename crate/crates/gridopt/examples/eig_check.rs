fn main() {
    let text = std::fs::read_to_string("/tmp/kkt_dump.txt").unwrap();
    let mut lines = text.lines();
    let head: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    let (dim, n, m_eq) = (head[0], head[1], head[2]);
    let mut dense = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        let (r, c): (usize, usize) = (t[0].parse().unwrap(), t[1].parse().unwrap());
        let v: f64 = t[2].parse().unwrap();
        dense[(r, c)] += v;
        if r != c {
            dense[(c, r)] += v;
        }
    }
    let eig = dense.symmetric_eigen();
    let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let maxa = evs.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    for &e in &evs {
        if e.abs() <= 1e-12 * maxa { zero += 1 } else if e > 0.0 { pos += 1 } else { neg += 1 }
    }
    println!("dim {dim} n {n} m_eq {m_eq}: dense inertia ({pos}, {neg}, {zero})");
    println!("smallest |eigs|: {:?}", evs.iter().map(|e| *e).filter(|e| e.abs() < 1e-3 * maxa).collect::<Vec<_>>());
}
