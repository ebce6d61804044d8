use crate::domain::{
    ContextualFactors, DataQuantity, DeviceLocation, InferredFactors, InteractionFrequency,
    InteractionTime, NoiseLevel,
};

/// Derive data properties from usage context.
///
/// Shared rooms and daytime use mean noisy input; frequent or daytime use
/// means more data. The task mix is taken as the data distribution.
pub fn infer_factors(context: &ContextualFactors) -> InferredFactors {
    let daytime = context.interaction_time == InteractionTime::Daytime;
    let noisy_room = matches!(
        context.device_location,
        DeviceLocation::LivingRoom | DeviceLocation::Kitchen
    );
    let noise_level = if noisy_room || daytime {
        NoiseLevel::High
    } else {
        NoiseLevel::Low
    };
    let data_quantity = if context.interaction_frequency == InteractionFrequency::High || daytime {
        DataQuantity::High
    } else {
        DataQuantity::Low
    };
    InferredFactors {
        noise_level,
        data_quantity,
        data_distribution: context.task_type_mix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TaskDistribution;

    fn ctx(l: DeviceLocation, t: InteractionTime, f: InteractionFrequency) -> ContextualFactors {
        ContextualFactors {
            device_location: l,
            interaction_time: t,
            interaction_frequency: f,
            task_type_mix: TaskDistribution::voice_assistant(),
        }
    }

    #[test]
    fn quiet_bedroom_at_night() {
        let i = infer_factors(&ctx(DeviceLocation::Bedroom, InteractionTime::Nighttime, InteractionFrequency::Low));
        assert_eq!((i.noise_level, i.data_quantity), (NoiseLevel::Low, DataQuantity::Low));
    }

    #[test]
    fn busy_living_room_by_day() {
        let i = infer_factors(&ctx(DeviceLocation::LivingRoom, InteractionTime::Daytime, InteractionFrequency::High));
        assert_eq!((i.noise_level, i.data_quantity), (NoiseLevel::High, DataQuantity::High));
    }

    #[test]
    fn office_mixed_medium_falls_through() {
        let c = ctx(DeviceLocation::Office, InteractionTime::Mixed, InteractionFrequency::Medium);
        let i = infer_factors(&c);
        assert_eq!((i.noise_level, i.data_quantity), (NoiseLevel::Low, DataQuantity::Low));
        assert_eq!(i.data_distribution, c.task_type_mix);
    }
}
