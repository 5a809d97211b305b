/* tslint:disable */
/* eslint-disable */

/**
 * Result of [`run_ramp`].
 */
export class Evolution {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `[E, D, K, W]` per step, flattened.
     */
    energies(): Float64Array;
    /**
     * Final `[alpha1, alpha2, slip]` per node, flattened.
     */
    fields(): Float64Array;
    nodes(): Float64Array;
    /**
     * Final `sigma1 + sigma2` per element.
     */
    stresses(): Float64Array;
    times(): Float64Array;
    readonly all_converged: boolean;
}

/**
 * Samples `[z, psi(z), phi(z, z_max)]` triples on `[0, 1.5 z_max]`, flattened.
 */
export function cohesive_curve(family: string, c: number, k: number, z_max: number, samples: number): Float64Array;

/**
 * `min m/M - lambda L^2 / pi^2` for power-law layers.
 */
export function regularity_margin(family: string, c: number, k: number, a1: number, a2: number, b: number, length: number): number;

/**
 * Linear ramp `u_bar = rate t` on `[0, 1]`, unit bar, small central damage seed in layer 1.
 */
export function run_ramp(family: string, c: number, k: number, a1: number, a2: number, rate: number, n_elems: number, n_steps: number): Evolution;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_evolution_free: (a: number, b: number) => void;
    readonly cohesive_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly evolution_all_converged: (a: number) => number;
    readonly evolution_energies: (a: number) => [number, number];
    readonly evolution_fields: (a: number) => [number, number];
    readonly evolution_nodes: (a: number) => [number, number];
    readonly evolution_stresses: (a: number) => [number, number];
    readonly evolution_times: (a: number) => [number, number];
    readonly regularity_margin: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly run_ramp: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
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
