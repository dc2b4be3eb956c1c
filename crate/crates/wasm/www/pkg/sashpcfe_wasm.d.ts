/* tslint:disable */
/* eslint-disable */

/**
 * One-dimensional H-PCFE fit; see [`demo::hpcfe_curve`].
 */
export function hpcfeCurve(xs: Float64Array, ys: Float64Array, degree: number, points: number): string;

/**
 * Density and distribution of one marginal; see [`demo::marginal_curve`].
 */
export function marginalCurve(kind: string, mean: number, sd: number, lo: number, hi: number, points: number): string;

/**
 * Sobol-g subspace pipeline; see [`demo::sobol_subspace`].
 */
export function sobolSubspace(m: number, n_train: number, n_mcs: number, mu: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly hpcfeCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly marginalCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly sobolSubspace: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
