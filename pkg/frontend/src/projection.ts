// World-to-canvas projection and the map color scheme.
//
// The map is a 2D top-down view: world y grows up, canvas y grows down.
// Everything rendered goes through worldToPx, so marker fidelity against
// the gateway's coordinates reduces to this module being exact.

export interface Viewport {
  widthPx: number;
  heightPx: number;
  worldWidth: number;
  worldHeight: number;
  marginPx: number;
}

export const DEFAULT_MARGIN_PX = 20;

export function defaultViewport(
  worldWidth: number,
  worldHeight: number,
  widthPx = 640,
  heightPx = 640,
): Viewport {
  return { widthPx, heightPx, worldWidth, worldHeight, marginPx: DEFAULT_MARGIN_PX };
}

export function scaleFor(view: Viewport): number {
  return Math.min(
    (view.widthPx - 2 * view.marginPx) / view.worldWidth,
    (view.heightPx - 2 * view.marginPx) / view.worldHeight,
  );
}

export function worldToPx(view: Viewport, x: number, y: number): { px: number; py: number } {
  const s = scaleFor(view);
  return {
    px: view.marginPx + x * s,
    py: view.heightPx - view.marginPx - y * s,
  };
}

export function pxToWorld(view: Viewport, px: number, py: number): { x: number; y: number } {
  const s = scaleFor(view);
  return {
    x: (px - view.marginPx) / s,
    y: (view.heightPx - view.marginPx - py) / s,
  };
}

// --- colors -----------------------------------------------------------------

const ROBOT_PALETTE = ['#4f83cc', '#66a85c', '#c08a3e', '#a070c0'];

export function robotColor(robotId: string, robotIds: string[]): string {
  const index = Math.max(0, robotIds.indexOf(robotId));
  return ROBOT_PALETTE[index % ROBOT_PALETTE.length];
}

/** Detection markers are a darker shade of their robot's trajectory color. */
export function detectionColor(robotId: string, robotIds: string[]): string {
  return darken(robotColor(robotId, robotIds), 0.45);
}

export function darken(hex: string, factor: number): string {
  const n = parseInt(hex.slice(1), 16);
  const scale = (v: number) => Math.round(v * (1 - factor));
  const r = scale((n >> 16) & 0xff);
  const g = scale((n >> 8) & 0xff);
  const b = scale(n & 0xff);
  return `#${((r << 16) | (g << 8) | b).toString(16).padStart(6, '0')}`;
}

export function luminance(hex: string): number {
  const n = parseInt(hex.slice(1), 16);
  return 0.2126 * ((n >> 16) & 0xff) + 0.7152 * ((n >> 8) & 0xff) + 0.0722 * (n & 0xff);
}

/** Aerial robots carry altitude as marker tint: higher flies brighter. */
export function altitudeTint(baseHex: string, z: number, zMax = 3.0): string {
  const clamped = Math.max(0, Math.min(z, zMax));
  return darken(baseHex, 0.3 * (1 - clamped / zMax));
}
