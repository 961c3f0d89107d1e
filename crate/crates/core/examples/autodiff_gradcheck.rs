//! Builds a two-layer graph network by hand on the tape, backpropagates, and
//! compares the gradients with central differences.

use lemp::graph::{Graph, NormAdj, Split};
use lemp::ndmath::{finite_diff_check, Matrix, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lemp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)];
    let labels: Vec<usize> = vec![0, 1, 0, 1];
    let g = Graph::build(4, &edges, labels.iter().map(|&l| Some(l)).collect(), vec![Split::Train; 4], None)?;
    let adj = NormAdj::new(&g);
    let x = Matrix::uniform(4, 3, -1.0, 1.0, &mut rng);
    let params = [
        Matrix::glorot(3, 5, &mut rng),
        Matrix::zeros(1, 5),
        Matrix::glorot(5, 2, &mut rng),
        Matrix::zeros(1, 2),
    ];
    let rows: Vec<usize> = (0..4).collect();

    let loss = |t: &mut Tape, v: &[lemp::ndmath::Var]| {
        let xv = t.constant(x.clone());
        let h = t.matmul(xv, v[0])?;
        let h = t.spmm(adj.csr().clone(), h)?;
        let h = t.add_bias(h, v[1])?;
        let h = t.sigmoid(h)?;
        let o = t.matmul(h, v[2])?;
        let o = t.spmm(adj.csr().clone(), o)?;
        let o = t.add_bias(o, v[3])?;
        t.softmax_cross_entropy(o, &rows, &labels)
    };

    let mut tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let l = loss(&mut tape, &vars)?;
    tape.backward(l)?;
    println!("loss {:.6}, tape length {}", tape.value(l)[(0, 0)], tape.len());
    println!("d loss / d W1 row 0: {:?}", tape.grad(vars[0]).unwrap().row(0));

    for step in [1e-3, 1e-5, 1e-7] {
        let rep = finite_diff_check(&params, step, loss)?;
        println!(
            "step {step:.0e}: max relative error {:.2e} at param {} entry {}",
            rep.max_relative_error, rep.worst.0, rep.worst.1
        );
    }
    Ok(())
}
