/**
 * Attention-side consumption of a decoded mask: a hook that pushes
 * disallowed logits to -Infinity before softmax (leaving allowed ones
 * untouched), optional step-indexed mode switching from an imported
 * schedule, and a reference masked-attention evaluation used to
 * cross-check the producing implementation.
 */

import type { BridgeMask, MaskMode } from "./wire.js";

export type Matrix = number[][];

function requireDense(mask: BridgeMask): boolean[][] {
    if (mask.dense === null) {
        throw new Error("mask carries no dense payload");
    }
    return mask.dense;
}

/** New logits with -Infinity wherever the mask forbids attention. */
export function applyMask(logits: Matrix, mask: BridgeMask): Matrix {
    const dense = requireDense(mask);
    if (logits.length !== mask.totalLen) {
        throw new Error(
            `sequence length mismatch: mask is for ${mask.totalLen} tokens, got ${logits.length}`,
        );
    }
    return logits.map((row, q) => {
        if (row.length !== mask.totalLen) {
            throw new Error("logit matrix is not square over the token count");
        }
        return row.map((value, k) => (dense[q][k] ? value : -Infinity));
    });
}

export function createAttentionHook(mask: BridgeMask): (logits: Matrix) => Matrix {
    return (logits) => applyMask(logits, mask);
}

/** Hook that follows the two-stage schedule: pass the denoising step index. */
export function createStagedHook(
    masks: Record<MaskMode, BridgeMask>,
    schedule: MaskMode[],
): (logits: Matrix, step: number) => Matrix {
    if (schedule.length === 0) {
        throw new Error("empty schedule");
    }
    return (logits, step) => {
        if (step < 0 || step >= schedule.length) {
            throw new Error(`step ${step} outside schedule of ${schedule.length}`);
        }
        return applyMask(logits, masks[schedule[step]]);
    };
}

export function matmul(a: Matrix, b: Matrix): Matrix {
    const inner = b.length;
    const out: Matrix = [];
    for (const row of a) {
        const result = new Array<number>(b[0].length).fill(0);
        for (let j = 0; j < inner; j++) {
            const v = row[j];
            const brow = b[j];
            for (let c = 0; c < brow.length; c++) {
                result[c] += v * brow[c];
            }
        }
        out.push(result);
    }
    return out;
}

function softmaxRows(logits: Matrix): Matrix {
    return logits.map((row) => {
        let max = -Infinity;
        for (const v of row) {
            if (v > max) max = v;
        }
        const exps = row.map((v) => Math.exp(v - max)); // exp(-Infinity) is exactly 0
        const sum = exps.reduce((s, v) => s + v, 0);
        return exps.map((v) => v / sum);
    });
}

/**
 * softmax(x Wq (x Wk)^T / sqrt(d)) (x Wv) under the mask; the same
 * computation the producing side runs, for cross-implementation checks.
 */
export function maskedAttention(
    x: Matrix,
    wq: Matrix,
    wk: Matrix,
    wv: Matrix,
    mask: BridgeMask,
): Matrix {
    const q = matmul(x, wq);
    const k = matmul(x, wk);
    const v = matmul(x, wv);
    const scale = 1 / Math.sqrt(wq[0].length);
    const logits = q.map((qrow) =>
        k.map((krow) => {
            let dot = 0;
            for (let i = 0; i < qrow.length; i++) {
                dot += qrow[i] * krow[i];
            }
            return dot * scale;
        }),
    );
    return matmul(softmaxRows(applyMask(logits, mask)), v);
}
