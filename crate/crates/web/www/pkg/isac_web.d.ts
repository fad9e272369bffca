/* tslint:disable */
/* eslint-disable */

export class ImageView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    dropIds(): Uint32Array;
    gainsDb(): Float64Array;
    positions(): Float64Array;
    readonly kept: number;
    readonly losSkipped: number;
    readonly pathsIn: number;
    readonly rejected: number;
}

/**
 * TX/RX positions of the bundled drops, six coordinates per drop.
 */
export function dropPositions(): Float64Array;

export function image(scene: string, drops: number, gamma: number, cutoff_dbm: number, diffuse: number, seed: number): ImageView;

/**
 * Triangle vertices, nine coordinates per triangle.
 */
export function sceneMesh(scene: string): Float64Array;

/**
 * Angles in radians; see [`explore_erp`] for the layout of the result.
 */
export function solvePath(tx: Float64Array, rx: Float64Array, aod_azimuth: number, aod_zenith: number, aoa_azimuth: number, aoa_zenith: number, length: number): Float64Array;

export function tradeoff(scene: string, gamma: number, cutoff_dbm: number, diffuse: number, seed: number, ref_points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_imageview_free: (a: number, b: number) => void;
    readonly dropPositions: () => [number, number];
    readonly image: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly imageview_dropIds: (a: number) => [number, number];
    readonly imageview_gainsDb: (a: number) => [number, number];
    readonly imageview_kept: (a: number) => number;
    readonly imageview_losSkipped: (a: number) => number;
    readonly imageview_pathsIn: (a: number) => number;
    readonly imageview_positions: (a: number) => [number, number];
    readonly imageview_rejected: (a: number) => number;
    readonly sceneMesh: (a: number, b: number) => [number, number, number, number];
    readonly solvePath: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly tradeoff: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
