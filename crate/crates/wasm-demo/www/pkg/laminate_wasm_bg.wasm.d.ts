/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_evolution_free: (a: number, b: number) => void;
export const cohesive_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const evolution_all_converged: (a: number) => number;
export const evolution_energies: (a: number) => [number, number];
export const evolution_fields: (a: number) => [number, number];
export const evolution_nodes: (a: number) => [number, number];
export const evolution_stresses: (a: number) => [number, number];
export const evolution_times: (a: number) => [number, number];
export const regularity_margin: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const run_ramp: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
