export * from "./types.js";
export * from "./format.js";
export * from "./grid.js";
export * from "./slider.js";
export * from "./api.js";
export * from "./feedback.js";
