/**
 * Minimal SVG curve rendering: linear SNR axis, log-10 probability axis
 * clipped to [1e-6, 1], Monte Carlo points with confidence whiskers,
 * analytic curves as lines, legend from series labels. No timestamps or
 * other volatile content are embedded, so identical inputs give identical
 * bytes.
 */

import type { Series } from "./families.js";

export const PROB_FLOOR = 1e-6;
export const PROB_CEIL = 1.0;

const WIDTH = 860;
const HEIGHT = 560;
const MARGIN = { left: 70, right: 230, top: 48, bottom: 56 };

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
];

function clipProb(v: number): number {
  return Math.min(PROB_CEIL, Math.max(PROB_FLOOR, v));
}

function fmt(v: number): string {
  return v.toFixed(2);
}

export function renderSvg(title: string, series: Series[]): string {
  const snrs = series.flatMap((s) => s.points.map((p) => p.snr));
  const xMin = Math.min(...snrs);
  const xMax = Math.max(...snrs);
  const xSpan = xMax > xMin ? xMax - xMin : 1;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const x = (snr: number) => MARGIN.left + ((snr - xMin) / xSpan) * plotW;
  const y = (p: number) =>
    MARGIN.top +
    plotH * (1 - (Math.log10(clipProb(p)) - Math.log10(PROB_FLOOR)) /
      (Math.log10(PROB_CEIL) - Math.log10(PROB_FLOOR)));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${MARGIN.left}" y="24" font-size="16">${escapeXml(title)}</text>`,
  );

  // grid and axes
  for (let e = 0; e >= Math.log10(PROB_FLOOR); e -= 1) {
    const gy = y(10 ** e);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(gy)}" ` +
        `x2="${WIDTH - MARGIN.right}" y2="${fmt(gy)}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
      `<text x="${MARGIN.left - 8}" y="${fmt(gy + 4)}" font-size="11" ` +
        `text-anchor="end">1e${e}</text>`,
    );
  }
  const xTicks = 8;
  for (let i = 0; i <= xTicks; i += 1) {
    const snr = xMin + (i / xTicks) * xSpan;
    const gx = x(snr);
    parts.push(
      `<line x1="${fmt(gx)}" y1="${MARGIN.top}" x2="${fmt(gx)}" ` +
        `y2="${HEIGHT - MARGIN.bottom}" stroke="#eeeeee" stroke-width="1"/>`,
      `<text x="${fmt(gx)}" y="${HEIGHT - MARGIN.bottom + 18}" ` +
        `font-size="11" text-anchor="middle">${snr.toFixed(0)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333333"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" ` +
      `font-size="13" text-anchor="middle">SNR (dB)</text>`,
    `<text x="20" y="${MARGIN.top + plotH / 2}" font-size="13" ` +
      `text-anchor="middle" transform="rotate(-90 20 ` +
      `${MARGIN.top + plotH / 2})">probability</text>`,
  );

  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const coords = s.points.map((p) => [x(p.snr), y(p.value)] as const);
    if (s.source === "montecarlo") {
      for (const [i, p] of s.points.entries()) {
        const [cx, cy] = coords[i];
        if (p.ci !== null && p.ci > 0) {
          const lo = y(clipProb(p.value - p.ci));
          const hi = y(clipProb(p.value + p.ci));
          parts.push(
            `<line x1="${fmt(cx)}" y1="${fmt(hi)}" x2="${fmt(cx)}" ` +
              `y2="${fmt(lo)}" stroke="${color}" stroke-width="1"/>`,
          );
        }
        parts.push(
          `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="3.2" ` +
            `fill="${color}"/>`,
        );
      }
      // faint connector to guide the eye along the grid
      parts.push(polyline(coords, color, 1, "2,3"));
    } else {
      parts.push(polyline(coords, color, 1.8));
    }
    const ly = MARGIN.top + 14 + idx * 16;
    const lx = WIDTH - MARGIN.right + 12;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" ` +
        `stroke="${color}" stroke-width="2"/>`,
      `<text x="${lx + 24}" y="${ly}" font-size="10.5">` +
        `${escapeXml(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function polyline(
  coords: readonly (readonly [number, number])[],
  color: string,
  width: number,
  dash?: string,
): string {
  const pts = coords.map(([a, b]) => `${fmt(a)},${fmt(b)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return (
    `<polyline points="${pts}" fill="none" stroke="${color}" ` +
    `stroke-width="${width}"${dashAttr}/>`
  );
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
