//! Reverse-mode pass through the unrolled recurrence.

use ndarray::{s, Array2, ArrayView2, Axis};

use super::loss::OutputGrads;
use crate::graph::LocGraph;
use crate::model::{phi_block, ModelParams, Trace};
use crate::real::Real;

fn relu_mask<T: Real>(g: &mut Array2<T>, z: &Array2<T>) {
    ndarray::Zip::from(g).and(z).for_each(|g, &z| {
        if z <= T::zero() {
            *g = T::zero();
        }
    });
}

/// `grad += a^T b`
fn add_outer<T: Real>(grad: &mut Array2<T>, a: &ArrayView2<T>, b: &ArrayView2<T>) {
    ndarray::linalg::general_mat_mul(T::one(), &a.t(), b, T::one(), grad);
}

fn add_colsum<T: Real>(grad: &mut ndarray::Array1<T>, a: &Array2<T>) {
    *grad += &a.sum_axis(Axis(0));
}

/// Accumulates parameter gradients into `grads` given the gradients of the loss
/// with respect to every step's decoder outputs.
pub(crate) fn backward<T: Real>(
    graph: &LocGraph<T>,
    params: &ModelParams<T>,
    trace: &Trace<T>,
    out_grads: &OutputGrads<T>,
    grads: &mut ModelParams<T>,
) {
    let l = params.config.latent_dim;
    let n = graph.n_nodes();
    let m = graph.n_edges();
    let w = &params.phi.weight;
    let k = trace.steps.len();

    let mut gu_next = Array2::<T>::zeros((n, l));
    let mut gf_next = Array2::<T>::zeros((m, l));
    let mut gv = Array2::<T>::zeros((n, l));
    let mut ge = Array2::<T>::zeros((m, l));
    let zeros_n = Array2::<T>::zeros((n, l));
    let zeros_m = Array2::<T>::zeros((m, l));

    for step in (0..k).rev() {
        let st = &trace.steps[step];
        let (u_prev, f_prev) = if step == 0 {
            (&zeros_n, &zeros_m)
        } else {
            (&trace.steps[step - 1].u, &trace.steps[step - 1].f)
        };

        // decoders read u of this step
        let gy = &out_grads.disp[step];
        let mut gu = gu_next;
        gu += &gy.dot(&params.disp_decoder.weight);
        add_outer(&mut grads.disp_decoder.weight, &gy.view(), &st.u.view());
        add_colsum(&mut grads.disp_decoder.bias, gy);
        if let (Some(gl), Some(dec), Some(gdec)) = (
            out_grads.logits.as_ref(),
            params.class_decoder.as_ref(),
            grads.class_decoder.as_mut(),
        ) {
            let gz = &gl[step];
            gu += &gz.dot(&dec.weight);
            add_outer(&mut gdec.weight, &gz.view(), &st.u.view());
            add_colsum(&mut gdec.bias, gz);
        }

        // node update
        relu_mask(&mut gu, &st.z_u);
        add_outer(&mut grads.psi.weight, &gu.view(), &st.agg.view());
        add_colsum(&mut grads.psi.bias, &gu);
        let g_agg = gu.dot(&params.psi.weight);

        // edge update
        let mut gz_f = gf_next;
        for (e, &(i, _)) in graph.edges().iter().enumerate() {
            let mut row = gz_f.row_mut(e);
            row += &g_agg.row(i);
        }
        relu_mask(&mut gz_f, &st.z_f);

        let mut g_i = Array2::<T>::zeros((n, l));
        let mut g_j = Array2::<T>::zeros((n, l));
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            let r = gz_f.row(e);
            let mut a = g_i.row_mut(i);
            a += &r;
            let mut b = g_j.row_mut(j);
            b += &r;
        }

        let gw = &mut grads.phi.weight;
        accumulate_block(gw, 0, l, &g_i, &trace.v);
        accumulate_block(gw, 1, l, &g_i, u_prev);
        accumulate_block(gw, 2, l, &g_j, &trace.v);
        accumulate_block(gw, 3, l, &g_j, u_prev);
        accumulate_block(gw, 4, l, &gz_f, &trace.e);
        accumulate_block(gw, 5, l, &gz_f, f_prev);
        add_colsum(&mut grads.phi.bias, &gz_f);

        gv += &g_i.dot(&phi_block(w, 0, l));
        gv += &g_j.dot(&phi_block(w, 2, l));
        ge += &gz_f.dot(&phi_block(w, 4, l));

        gu_next = g_i.dot(&phi_block(w, 1, l)) + g_j.dot(&phi_block(w, 3, l));
        gf_next = gz_f.dot(&phi_block(w, 5, l));
    }

    add_outer(&mut grads.node_encoder.weight, &gv.view(), &graph.node_feats().view());
    add_colsum(&mut grads.node_encoder.bias, &gv);
    add_outer(&mut grads.edge_encoder.weight, &ge.view(), &trace.edge_in.view());
    add_colsum(&mut grads.edge_encoder.bias, &ge);
}

fn accumulate_block<T: Real>(gw: &mut Array2<T>, block: usize, l: usize, g: &Array2<T>, x: &Array2<T>) {
    let mut view = gw.slice_mut(s![.., block * l..(block + 1) * l]);
    ndarray::linalg::general_mat_mul(T::one(), &g.t(), x, T::one(), &mut view);
}
