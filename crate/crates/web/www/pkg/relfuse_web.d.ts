/* tslint:disable */
/* eslint-disable */

/**
 * Decodes a synthetic noisy relation map with every weight family; returns JSON.
 */
export function decodeNoisyMap(beta: number, size: number, anchor_x: number, anchor_y: number, noise_growth: number, seed: bigint): string;

/**
 * Synthesizes a sequence, tracks it with every preset and returns JSON curves.
 */
export function trackDemo(joints: string, frames: number, sigma_single: number, sigma_relation: number, alpha: number, gamma: number, seed: bigint): string;

/**
 * Weight map of `family` (e.g. `"gaussian"`) as a row-major `height * width` array.
 */
export function weightMap(family: string, beta: number, height: number, width: number, anchor_x: number, anchor_y: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly decodeNoisyMap: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly trackDemo: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly weightMap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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
