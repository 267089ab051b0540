// Map fidelity: markers land where the gateway says the objects are.

import { describe, expect, it } from 'vitest';

import { DETECTION_RADIUS_PX, drawDetection, DrawContext } from '../src/map.js';
import {
  altitudeTint,
  darken,
  defaultViewport,
  detectionColor,
  luminance,
  pxToWorld,
  robotColor,
  scaleFor,
  worldToPx,
} from '../src/projection.js';
import type { ObjectAsset } from '../src/types.js';

const VIEW = defaultViewport(6.3, 6.3); // the 40 m^2 room at default zoom

class RecordingContext implements DrawContext {
  arcs: { x: number; y: number; r: number }[] = [];
  labels: { text: string; x: number; y: number }[] = [];
  strokeStyle = '';
  fillStyle = '';
  lineWidth = 1;
  font = '';
  globalAlpha = 1;
  clearRect(): void {}
  beginPath(): void {}
  moveTo(): void {}
  lineTo(): void {}
  arc(x: number, y: number, r: number): void {
    this.arcs.push({ x, y, r });
  }
  rect(): void {}
  fill(): void {}
  stroke(): void {}
  closePath(): void {}
  fillText(text: string, x: number, y: number): void {
    this.labels.push({ text, x, y });
  }
}

function objectAsset(x: number, y: number, label = 'banana'): ObjectAsset {
  return {
    asset_id: `obj~${label}~uav1~000001`,
    label,
    x,
    y,
    z: 1.0,
    robot_id: 'uav1',
    confidence: 0.9,
    stamp: '123',
    owner_org: 'Org1',
  };
}

describe('projection', () => {
  it('round-trips world <-> pixel coordinates', () => {
    for (const [x, y] of [[0, 0], [6.3, 6.3], [1.234, 5.4321], [3.15, 0.01]]) {
      const { px, py } = worldToPx(VIEW, x, y);
      const back = pxToWorld(VIEW, px, py);
      expect(back.x).toBeCloseTo(x, 9);
      expect(back.y).toBeCloseTo(y, 9);
    }
  });

  it('maps the room corners onto the canvas with margins', () => {
    expect(worldToPx(VIEW, 0, 0)).toEqual({ px: 20, py: 620 });
    expect(worldToPx(VIEW, 6.3, 6.3)).toEqual({ px: 620, py: 20 });
  });

  it('flips the y axis (world up = canvas up)', () => {
    const low = worldToPx(VIEW, 1, 1);
    const high = worldToPx(VIEW, 1, 5);
    expect(high.py).toBeLessThan(low.py);
  });
});

describe('detection markers (map fidelity)', () => {
  it('renders each marker within 1 px of the gateway coordinates', () => {
    // objects exactly as GET /api/objects would return them
    const objects = [
      objectAsset(1.0, 1.5),
      objectAsset(2.29, 3.15, 'laptop'),
      objectAsset(5.3, 4.8, 'clock'),
      objectAsset(0.07, 6.25, 'cup'),
    ];
    const ctx = new RecordingContext();
    for (const obj of objects) {
      drawDetection(ctx, VIEW, obj, ['uav1']);
    }
    const scale = scaleFor(VIEW);
    expect(ctx.arcs).toHaveLength(objects.length);
    objects.forEach((obj, i) => {
      const drawn = ctx.arcs[i];
      const expected = worldToPx(VIEW, obj.x, obj.y);
      // rendered centre equals the projected gateway coordinate (±1 px)
      expect(Math.abs(drawn.x - expected.px)).toBeLessThanOrEqual(1);
      expect(Math.abs(drawn.y - expected.py)).toBeLessThanOrEqual(1);
      // and projecting back recovers the asset coordinates within 1 px worth
      const back = pxToWorld(VIEW, drawn.x, drawn.y);
      expect(Math.abs(back.x - obj.x)).toBeLessThanOrEqual(1 / scale);
      expect(Math.abs(back.y - obj.y)).toBeLessThanOrEqual(1 / scale);
      expect(drawn.r).toBe(DETECTION_RADIUS_PX);
    });
  });

  it('labels every marker with its category', () => {
    const ctx = new RecordingContext();
    drawDetection(ctx, VIEW, objectAsset(2, 2, 'teddy bear'), ['uav1']);
    expect(ctx.labels.map((l) => l.text)).toContain('teddy bear');
  });

  it('draws detections darker than the trajectory color', () => {
    const robots = ['dashgo', 'uav1'];
    for (const robot of robots) {
      const base = robotColor(robot, robots);
      const marker = detectionColor(robot, robots);
      expect(luminance(marker)).toBeLessThan(luminance(base));
    }
  });
});

describe('colors', () => {
  it('darken scales channels down monotonically', () => {
    expect(darken('#808080', 0.5)).toBe('#404040');
    expect(luminance(darken('#4f83cc', 0.45))).toBeLessThan(luminance('#4f83cc'));
  });

  it('altitude tint brightens with height', () => {
    const ground = altitudeTint('#4f83cc', 0);
    const mid = altitudeTint('#4f83cc', 1.5);
    const top = altitudeTint('#4f83cc', 3.0);
    expect(luminance(ground)).toBeLessThan(luminance(mid));
    expect(luminance(mid)).toBeLessThan(luminance(top));
    expect(top).toBe('#4f83cc');
  });
});
