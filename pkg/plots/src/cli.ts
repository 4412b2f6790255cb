#!/usr/bin/env node
/** CLI: uwauth-plots --in DIR --family NAME --out PATH */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { FAMILY_NAMES } from "./families.js";
import { render } from "./render.js";
import { SchemaError } from "./schema.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "directory holding sweep CSVs",
    })
    .option("family", {
      type: "string",
      demandOption: true,
      choices: FAMILY_NAMES,
      describe: "figure family to render",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .strict()
    .help()
    .parse();
  try {
    const result = render(args.in, args.family, args.out);
    console.log(
      `wrote ${result.output} (${result.bytes} bytes, ` +
        `${result.series} series) and ${result.manifest}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
