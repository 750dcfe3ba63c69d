/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA bytes of anchor frame `k`.
     */
    anchor_frame(k: number): Uint8Array;
    /**
     * MSE against anchor frame 0 for each candidate of the default sweep,
     * followed by the candidate focals: `[mse_0.., focal_0..]`.
     */
    focal_curve(): Float64Array;
    frame_count(): number;
    height(): number;
    iterations(): number;
    /**
     * RGBA bytes of the mesh rendered at `focal`, to compare with the anchor.
     */
    mesh_at_focal(focal: number): Uint8Array;
    /**
     * A 64x64 fixture with `gaussians` points sampled from its mesh.
     */
    constructor(seed: bigint, gaussians: number);
    /**
     * Trains the deformation field from scratch for `steps` iterations;
     * returns the mean front-view PSNR across frames.
     */
    optimize_dynamic(steps: number): number;
    /**
     * Runs `steps` static iterations, returns the front-view PSNR.
     * Each call starts a fresh optimizer state.
     */
    optimize_static(steps: number): number;
    /**
     * RGBA bytes of the current cloud at normalized time `t` seen from an orbit camera.
     */
    render_view(azimuth: number, elevation: number, t: number): Uint8Array;
    true_focal(): number;
    width(): number;
}

/**
 * Two mock denoisers that want different images. Returns the RGBA bytes of
 * the final image followed by two little-endian `f32`s: its MSE to the
 * average of the targets and to the anchor (the first target).
 */
export function conflict_demo(size: number, anchor_weight: number, steps: number, seed: bigint): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly conflict_demo: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly demo_anchor_frame: (a: number, b: number) => [number, number];
    readonly demo_focal_curve: (a: number) => [number, number, number, number];
    readonly demo_frame_count: (a: number) => number;
    readonly demo_height: (a: number) => number;
    readonly demo_iterations: (a: number) => number;
    readonly demo_mesh_at_focal: (a: number, b: number) => [number, number, number, number];
    readonly demo_new: (a: bigint, b: number) => [number, number, number];
    readonly demo_optimize_dynamic: (a: number, b: number) => [number, number, number];
    readonly demo_optimize_static: (a: number, b: number) => [number, number, number];
    readonly demo_render_view: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_true_focal: (a: number) => number;
    readonly demo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
