//! Fixed text banks for the system and personalized prompts.

use crate::policy::Mode;

pub const ENVIRONMENT: [&str; 11] = [
    "You, the 'ego' car, are now driving a car on a road.",
    "You, embodying the 'ego' vehicle, are currently maneuvering a sleek sedan down a bustling city street.",
    "As the 'ego' car, you find yourself smoothly cruising along a winding country road, surrounded by nature.",
    "You, operating as the 'ego' car, are navigating through a densely packed highway with precision and care.",
    "In the role of the 'ego' car, you are gently steering a family car down a quiet, suburban neighborhood street.",
    "You, the 'ego' car, are currently threading through traffic in an urban setting, with skyscrapers towering above.",
    "As the 'ego' car, you're driving a convertible along a picturesque coastal road, with the ocean breeze in your hair.",
    "You, in the capacity of the 'ego' car, are maneuvering a compact vehicle through a maze of narrow, cobbled streets in an old town.",
    "You, the 'ego' car, are now gliding along a deserted road that cuts through a vast, serene desert landscape.",
    "As the 'ego' car, you find yourself at the helm of a rugged SUV, traversing a rough, mountainous terrain.",
    "In the role of the 'ego' car, you're piloting a luxury car down a glamorous, tree-lined boulevard in a posh neighborhood.",
];

pub const LEGEND: [&str; 11] = [
    "The green box is 'ego' car, the blue box is other vehicles, the gray box is the historical trajectory of the car, the gray background is the ground, the white solid line is the edge of the road, and the white dotted line is the lane line.",
    "The vivid green box represents the 'ego' car, while the azure blue box delineates other vehicles; the slate gray box traces the car's past path, set against a monochrome gray backdrop signifying the ground, bordered by the stark white lines marking the road's boundaries and the dashed lines indicating the lanes.",
    "A bright green box symbolizes the 'ego' car, surrounded by sky blue boxes for nearby vehicles; a muted gray box outlines the vehicle's previous route, all on a neutral gray canvas representing the ground, with clean white lines framing the road's edges and speckled lines partitioning the lanes.",
    "In this schematic, the 'ego' car is a lime green box, other vehicles are marked by cerulean blue boxes, and the car's history is a charcoal gray box, all laid out on a gray ground, with the road's periphery and lanes defined by unblemished white lines and intermittent dashes, respectively.",
    "Here, the 'ego' car is encapsulated within an emerald green box, contrasted by cobalt blue boxes for other vehicles and a smoky gray box mapping the car's trajectory, all against a stone gray ground, flanked by pure white lines demarcating the road's edge and the segmented lines allocating the lanes.",
    "The scene features the 'ego' car as a forest green box, other vehicles as navy blue boxes, and the car's historical path as a steel gray box, all against a matte gray surface symbolizing the ground, with the road's outline and lane separations clearly defined by continuous and dotted white lines, respectively.",
    "In this visual, the 'ego' car is indicated by a mint green box, with sapphire blue boxes for other vehicles and a dove gray box for the car's past path, all positioned on a silvery gray ground, bordered by the pristine white lines of the road's extremities and the punctuated lines demarcating the lanes.",
    "This representation shows the 'ego' car as a jade green box, other vehicles as royal blue boxes, and the car's historical route as an ash gray box, all against a pewter gray ground, with the road's periphery and lane divisions etched in immaculate white solid and dashed lines.",
    "In this depiction, the 'ego' car is a shamrock green box, juxtaposed with indigo blue boxes for other vehicles and a shadow gray box tracing the car's former trajectory, all set upon a slate gray ground, edged by the road's crisp white border and the punctuated lines that segment the lanes.",
    "The layout presents the 'ego' car as an olive green box, with other vehicles as lapis blue boxes and the car's historical pathway as a fog gray box, all over a charcoal gray ground, with the road's margins and lane separations crisply delineated by solid and dotted white lines.",
    "Here, the 'ego' car is a hunter green box, other vehicles are in teal blue boxes, and the car's previous movements are in a graphite gray box, all against a flint gray ground, with the white lines cleanly defining the road's edge and the dash-lined lanes.",
];

pub const NOTICE: [&str; 11] = [
    "Please first describe the scene, then estimate the risk of each action.",
    "Initially, provide a depiction of the scene, followed by an assessment of the risk associated with each possible action.",
    "Begin by detailing the scene, then proceed to evaluate the potential risk entailed by each action.",
    "First, portray the setting of the scenario, and subsequently, analyze the risk level of every action.",
    "Start with a description of the scene, then move on to ascertain the risk involved in each specific action.",
    "Initially, paint a picture of the scene, then methodically gauge the risk each action carries.",
    "Commence by depicting the scene, and then proceed to estimate the risk factor for each action.",
    "First, lay out the scene in detail, then evaluate the risk associated with each action taken.",
    "Begin by giving a visual account of the scene, followed by a risk estimation for each action.",
    "Start with a narrative of the scene, and then progress to determine the risk level of each possible action.",
    "Lead with a comprehensive description of the scene, then assess the risk implicated by each action.",
];

pub const FAST_INSTRUCTION: &str = "Please maintain speed as much as possible, which means avoiding taking action <slower>, which corresponds to decelerate or slower.";
pub const NORMAL_INSTRUCTION: &str =
    "Please prioritize safety and comfort as much as possible, which means avoiding frequent lane changes.";
pub const SLOW_INSTRUCTION: &str = "Please keep safety by avoiding taking action <faster>, corresponding to accelerate or faster, and minimizing lane changes.";

pub fn instruction(mode: Mode) -> &'static str {
    match mode {
        Mode::Fast => FAST_INSTRUCTION,
        Mode::Normal => NORMAL_INSTRUCTION,
        Mode::Slow => SLOW_INSTRUCTION,
    }
}
