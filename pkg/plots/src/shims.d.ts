// Ambient declarations for the runtime dependencies that ship no types in
// this environment; only the surfaces this package uses are declared.

declare module "papaparse" {
  export interface ParseError {
    type: string;
    code: string;
    message: string;
    row?: number;
  }
  export interface ParseMeta {
    fields?: string[];
    delimiter: string;
    linebreak: string;
    aborted: boolean;
    truncated: boolean;
  }
  export interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
    meta: ParseMeta;
  }
  export interface ParseConfig {
    header?: boolean;
    comments?: string | boolean;
    skipEmptyLines?: boolean | "greedy";
    delimiter?: string;
  }
  function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;
  const Papa: { parse: typeof parse };
  export { parse };
  export default Papa;
}

declare module "yargs" {
  export interface Argv {
    option(name: string, spec: Record<string, unknown>): Argv;
    strict(): Argv;
    help(): Argv;
    parse(): Promise<Record<string, unknown> & { in: string; family: string; out: string }>;
  }
  function yargs(argv: string[]): Argv;
  export default yargs;
}

declare module "yargs/helpers" {
  export function hideBin(argv: string[]): string[];
}
