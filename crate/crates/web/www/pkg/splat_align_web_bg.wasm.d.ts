/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const conflict_demo: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const demo_anchor_frame: (a: number, b: number) => [number, number];
export const demo_focal_curve: (a: number) => [number, number, number, number];
export const demo_frame_count: (a: number) => number;
export const demo_height: (a: number) => number;
export const demo_iterations: (a: number) => number;
export const demo_mesh_at_focal: (a: number, b: number) => [number, number, number, number];
export const demo_new: (a: bigint, b: number) => [number, number, number];
export const demo_optimize_dynamic: (a: number, b: number) => [number, number, number];
export const demo_optimize_static: (a: number, b: number) => [number, number, number];
export const demo_render_view: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_true_focal: (a: number) => number;
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
