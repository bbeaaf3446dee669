/* tslint:disable */
/* eslint-disable */

/**
 * Synthesizes a noisy readout at a pose and localizes it.
 */
export function localize_noisy(design: string, d_mm: number, theta_deg: number, noise_frac: number, seed: number): string;

/**
 * The eight photodiode responses over a full turn at distance `d_mm`.
 */
export function response_curves(design: string, d_mm: number): string;

/**
 * Traces an emission fan off `profile` ("vertical-stage1" or "flower").
 */
export function trace_fan(profile: string, half_angle_deg: number, n_rays: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly localize_noisy: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly response_curves: (a: number, b: number, c: number) => [number, number, number, number];
    readonly trace_fan: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
