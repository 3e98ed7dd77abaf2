/* tslint:disable */
/* eslint-disable */

export function classify_json(d: number): string;

/**
 * Samples an n-lift, brackets its chromatic number and counts short cycles.
 */
export function sample_lift_json(graph_spec: string, n: number, seed: bigint): string;

/**
 * log(C2/C1^2) against the partial sums of the cycle series.
 */
export function sscm_json(graph_spec: string, k: number): string;

/**
 * u_k and l_k for k = 3..=k_max.
 */
export function thresholds_json(k_max: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly classify_json: (a: number) => [number, number, number, number];
    readonly sample_lift_json: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly sscm_json: (a: number, b: number, c: number) => [number, number, number, number];
    readonly thresholds_json: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
