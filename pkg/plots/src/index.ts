export { FAMILIES, FAMILY_NAMES, buildSeries } from "./families.js";
export { render } from "./render.js";
export { CSV_COLUMNS, SchemaError, loadDirectory, parseCurveCsv }
  from "./schema.js";
export { renderSvg, PROB_FLOOR, PROB_CEIL } from "./svg.js";
