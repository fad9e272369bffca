/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_imageview_free: (a: number, b: number) => void;
export const dropPositions: () => [number, number];
export const image: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const imageview_dropIds: (a: number) => [number, number];
export const imageview_gainsDb: (a: number) => [number, number];
export const imageview_kept: (a: number) => number;
export const imageview_losSkipped: (a: number) => number;
export const imageview_pathsIn: (a: number) => number;
export const imageview_positions: (a: number) => [number, number];
export const imageview_rejected: (a: number) => number;
export const sceneMesh: (a: number, b: number) => [number, number, number, number];
export const solvePath: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const tradeoff: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
